//! Discrete-time simulator and analytical toolkit for a single
//! energy-harvesting sensor node with a finite battery and a finite data
//! buffer.
//!
//! The crate models a node whose battery of capacity `M` refills from an
//! ergodic replenishment process and serves data through a concave
//! rate-power function, optionally buffering arrivals in a queue of
//! capacity `K`. Energy-management policies trade long-run utility
//! against the probabilities of complete battery discharge and of data
//! loss; the [`analysis`] module carries the matching closed-form decay
//! predictions and fitting helpers, and [`simulator::exact`] provides an
//! exact finite-chain oracle for integer-valued configurations.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or
//! `f64`); [`Real`] is the concrete default used by the CLI.

pub mod analysis;
pub mod channel;
pub mod policies;
pub mod processes;
pub mod scalar;
pub mod simulator;
pub mod stats;

/// Default concrete scalar type.
pub type Real = f64;

pub use channel::{awgn_inverse_rate, awgn_rate, ConcaveTable, RatePower, Utility};
pub use policies::Policy;
pub use processes::{estimate_asymptotic_stats, AsymStats, ProcessSource, Sampler};
pub use scalar::{real, SampleScalar, Scalar};
pub use simulator::exact::exact_chain_analysis;
pub use simulator::{run, run_batched, run_traced, step, Estimate, Metrics, Mode, NodeState, SimConfig, SlotRecord};
