//! Energy-management policies.
//!
//! Each policy maps the node state to a requested per-slot energy draw:
//!
//! * `scheme-b`: two-level draw `mean -/+ drift` switched at the half-full
//!   battery threshold, with `drift = order * asym_var * ln(M) / M`.
//! * `scheme-q`: two-level draw switched at the half-full queue threshold,
//!   with the two energy offsets chosen so the queue drifts toward `K/2`
//!   at the same rate from both sides.
//! * `scheme-e`: constant draw `mean - drift`, exposing the tradeoff
//!   between discharge and loss decay exponents.
//! * `scheme-to`: throughput-optimal baseline `min(battery, mean - margin)`.
//! * `constant`: fixed draw.
//!
//! Logarithms in drift formulas are natural logs; order-of-decay results
//! are base-invariant but fitted constants are not, so this is fixed here.

use thiserror::Error;

use crate::channel::RatePower;
use crate::scalar::{real, Scalar};
use crate::simulator::Mode;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("invalid policy configuration: {0}")]
    Config(String),
    #[error("stability condition λ < C(µ) violated: arrival mean {lambda} >= channel rate {capacity} at the mean draw")]
    Stability { lambda: String, capacity: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy<S: Scalar> {
    SchemeB {
        mean: S,
        drift: S,
        battery_capacity: S,
    },
    SchemeQ {
        mean: S,
        /// Energy offset while the queue is at or above half full; the
        /// smaller of the two, giving service above the arrival rate.
        drift_above: S,
        /// Energy offset while the queue is below half full.
        drift_below: S,
        /// Induced symmetric queue drift toward half full.
        queue_drift: S,
        buffer_capacity: S,
    },
    SchemeE {
        mean: S,
        drift: S,
        /// Induced queue drift `C(mean - drift) - lambda`, kept for the
        /// analysis layer.
        queue_drift: S,
    },
    ThroughputOptimal {
        mean: S,
        margin: S,
    },
    Constant {
        draw: S,
    },
}

impl<S: Scalar> Policy<S> {
    /// Battery-threshold scheme with drift derived from the battery size:
    /// `drift = order * asym_var * ln(capacity) / capacity`.
    pub fn scheme_b(mean: S, asym_var: S, order: S, battery_capacity: S) -> Result<Self, PolicyError> {
        if battery_capacity <= S::one() {
            return Err(PolicyError::Config(format!(
                "battery capacity must exceed 1, got {battery_capacity}"
            )));
        }
        if order < real::<S>(2.0) {
            return Err(PolicyError::Config(format!("order must be at least 2, got {order}")));
        }
        if mean <= S::zero() || asym_var <= S::zero() {
            return Err(PolicyError::Config(
                "replenishment mean and asymptotic variance must be positive".into(),
            ));
        }
        let drift = order * asym_var * battery_capacity.ln() / battery_capacity;
        Self::scheme_b_with_drift(mean, drift, battery_capacity)
    }

    /// Battery-threshold scheme with an explicit drift.
    pub fn scheme_b_with_drift(mean: S, drift: S, battery_capacity: S) -> Result<Self, PolicyError> {
        if battery_capacity <= S::zero() {
            return Err(PolicyError::Config(format!(
                "battery capacity must be positive, got {battery_capacity}"
            )));
        }
        if drift <= S::zero() || mean - drift <= S::zero() {
            return Err(PolicyError::Config(format!(
                "battery too small for these parameters: drift {drift} must lie in (0, mean {mean})"
            )));
        }
        Ok(Policy::SchemeB { mean, drift, battery_capacity })
    }

    /// Queue-threshold scheme with queue drift derived from the buffer
    /// size: `queue_drift = order * arrival_asym_var * ln(capacity) /
    /// capacity`, and energy offsets solving
    /// `C(mean - drift_above) - lambda = lambda - C(mean - drift_below) =
    /// queue_drift`.
    pub fn scheme_q(
        mean: S,
        arrival_mean: S,
        arrival_asym_var: S,
        order: S,
        buffer_capacity: S,
        rate: &RatePower<S>,
    ) -> Result<Self, PolicyError> {
        if buffer_capacity <= S::one() {
            return Err(PolicyError::Config(format!(
                "buffer capacity must exceed 1, got {buffer_capacity}"
            )));
        }
        if order < real::<S>(2.0) {
            return Err(PolicyError::Config(format!("order must be at least 2, got {order}")));
        }
        if arrival_asym_var <= S::zero() || arrival_mean <= S::zero() {
            return Err(PolicyError::Config(
                "arrival mean and asymptotic variance must be positive".into(),
            ));
        }
        let queue_drift = order * arrival_asym_var * buffer_capacity.ln() / buffer_capacity;
        Self::scheme_q_with_queue_drift(mean, arrival_mean, queue_drift, buffer_capacity, rate)
    }

    /// Queue-threshold scheme with an explicit symmetric queue drift.
    pub fn scheme_q_with_queue_drift(
        mean: S,
        arrival_mean: S,
        queue_drift: S,
        buffer_capacity: S,
        rate: &RatePower<S>,
    ) -> Result<Self, PolicyError> {
        let capacity = rate.rate(mean);
        if arrival_mean >= capacity {
            return Err(PolicyError::Stability {
                lambda: arrival_mean.to_string(),
                capacity: capacity.to_string(),
            });
        }
        if queue_drift <= S::zero() {
            return Err(PolicyError::Config(format!(
                "queue drift must be positive, got {queue_drift}"
            )));
        }
        if queue_drift >= arrival_mean {
            return Err(PolicyError::Config(format!(
                "queue drift {queue_drift} must stay below the arrival mean {arrival_mean}"
            )));
        }
        if arrival_mean + queue_drift >= capacity {
            return Err(PolicyError::Config(format!(
                "buffer too small: arrival mean plus queue drift {} reaches the channel rate {capacity} at the mean draw",
                arrival_mean + queue_drift
            )));
        }
        let drift_above = mean - rate.inverse(arrival_mean + queue_drift);
        let drift_below = mean - rate.inverse(arrival_mean - queue_drift);
        let policy = Policy::SchemeQ {
            mean,
            drift_above,
            drift_below,
            queue_drift,
            buffer_capacity,
        };
        let residual = policy.queue_drift_residual(arrival_mean, rate);
        if residual > real::<S>(1e-10) {
            return Err(PolicyError::Config(format!(
                "drift relation failed to hold to tolerance (residual {residual})"
            )));
        }
        Ok(policy)
    }

    /// Queue-threshold scheme from explicit energy offsets; the implied
    /// queue drifts from both branches must agree to 1e-10.
    pub fn scheme_q_with_drifts(
        mean: S,
        arrival_mean: S,
        drift_above: S,
        drift_below: S,
        buffer_capacity: S,
        rate: &RatePower<S>,
    ) -> Result<Self, PolicyError> {
        let capacity = rate.rate(mean);
        if arrival_mean >= capacity {
            return Err(PolicyError::Stability {
                lambda: arrival_mean.to_string(),
                capacity: capacity.to_string(),
            });
        }
        if buffer_capacity <= S::zero() {
            return Err(PolicyError::Config("buffer capacity must be positive".into()));
        }
        if drift_above <= S::zero() || drift_below < drift_above || mean - drift_below < S::zero() {
            return Err(PolicyError::Config(format!(
                "offsets must satisfy 0 < drift_above <= drift_below <= mean, got {drift_above}, {drift_below}"
            )));
        }
        let up = rate.rate(mean - drift_above) - arrival_mean;
        let down = arrival_mean - rate.rate(mean - drift_below);
        if up <= S::zero() || down <= S::zero() {
            return Err(PolicyError::Config(
                "offsets do not produce a drift toward half full from both sides".into(),
            ));
        }
        if (up - down).abs() > real::<S>(1e-10) * S::one().max(up.abs()) {
            return Err(PolicyError::Config(format!(
                "asymmetric queue drifts: {up} above vs {down} below"
            )));
        }
        Ok(Policy::SchemeQ {
            mean,
            drift_above,
            drift_below,
            queue_drift: up,
            buffer_capacity,
        })
    }

    /// Constant-draw scheme `mean - drift` with
    /// `0 < drift < mean - C^-1(arrival_mean)` (open interval).
    pub fn scheme_e(
        mean: S,
        drift: S,
        arrival_mean: S,
        rate: &RatePower<S>,
    ) -> Result<Self, PolicyError> {
        let capacity = rate.rate(mean);
        if arrival_mean >= capacity {
            return Err(PolicyError::Stability {
                lambda: arrival_mean.to_string(),
                capacity: capacity.to_string(),
            });
        }
        let bound = mean - rate.inverse(arrival_mean);
        if drift <= S::zero() || drift >= bound {
            return Err(PolicyError::Config(format!(
                "drift {drift} outside the open interval (0, {bound})"
            )));
        }
        let queue_drift = rate.rate(mean - drift) - arrival_mean;
        Ok(Policy::SchemeE { mean, drift, queue_drift })
    }

    /// Throughput-optimal baseline `min(battery, mean - margin)`. When an
    /// arrival mean is given, the margin must keep the service rate above
    /// it.
    pub fn throughput_optimal(
        mean: S,
        margin: S,
        arrival_mean: Option<S>,
        rate: &RatePower<S>,
    ) -> Result<Self, PolicyError> {
        if margin <= S::zero() || margin >= mean {
            return Err(PolicyError::Config(format!(
                "margin {margin} must lie in (0, mean {mean})"
            )));
        }
        if let Some(lambda) = arrival_mean {
            let served = rate.rate(mean - margin);
            if served <= lambda {
                return Err(PolicyError::Config(format!(
                    "infeasible margin: service rate {served} at the reduced draw does not exceed the arrival mean {lambda}"
                )));
            }
        }
        Ok(Policy::ThroughputOptimal { mean, margin })
    }

    /// Fixed draw every slot.
    pub fn constant(draw: S) -> Result<Self, PolicyError> {
        if draw < S::zero() {
            return Err(PolicyError::Config(format!("draw must be nonnegative, got {draw}")));
        }
        Ok(Policy::Constant { draw })
    }

    /// The scheme's raw request before feasibility clamps. Threshold
    /// boundaries belong to the upper branch: a battery at exactly half
    /// full requests `mean + drift`, a queue at exactly half full selects
    /// `drift_above`.
    #[inline]
    pub fn raw_request(&self, battery: S, queue: S) -> S {
        match *self {
            Policy::SchemeB { mean, drift, battery_capacity } => {
                if battery >= battery_capacity * real::<S>(0.5) {
                    mean + drift
                } else {
                    mean - drift
                }
            }
            Policy::SchemeQ { mean, drift_above, drift_below, buffer_capacity, .. } => {
                if queue >= buffer_capacity * real::<S>(0.5) {
                    mean - drift_above
                } else {
                    mean - drift_below
                }
            }
            Policy::SchemeE { mean, drift, .. } => mean - drift,
            Policy::ThroughputOptimal { mean, margin } => (mean - margin).min(battery),
            Policy::Constant { draw } => draw,
        }
    }

    /// Feasible per-slot draw for a state snapshot: the raw request
    /// clamped to the stored energy, and in joint mode additionally to the
    /// energy whose service rate would drain the whole queue.
    pub fn decide(&self, battery: S, queue: S, rate: &RatePower<S>, mode: Mode) -> S {
        let e = self.raw_request(battery, queue).min(battery).max(S::zero());
        match mode {
            Mode::BatteryOnly => e,
            Mode::Joint => e.min(rate.inverse(queue.max(S::zero()))),
        }
    }

    /// True for schemes that read the queue state.
    pub fn needs_queue(&self) -> bool {
        matches!(self, Policy::SchemeQ { .. })
    }

    /// Stable kind tag matching the configuration schema.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Policy::SchemeB { .. } => "scheme-b",
            Policy::SchemeQ { .. } => "scheme-q",
            Policy::SchemeE { .. } => "scheme-e",
            Policy::ThroughputOptimal { .. } => "scheme-to",
            Policy::Constant { .. } => "constant",
        }
    }

    /// Residual of the symmetric-queue-drift relation for scheme-q
    /// (zero for other kinds).
    pub fn queue_drift_residual(&self, arrival_mean: S, rate: &RatePower<S>) -> S {
        match *self {
            Policy::SchemeQ { mean, drift_above, drift_below, queue_drift, .. } => {
                let up = rate.rate(mean - drift_above) - arrival_mean;
                let down = arrival_mean - rate.rate(mean - drift_below);
                (up - queue_drift).abs().max((down - queue_drift).abs())
            }
            _ => S::zero(),
        }
    }
}
