//! Discrete-time node evolution under a policy.
//!
//! One slot: the policy requests a draw from the current state, the
//! request is clamped to what is feasible (stored energy plus this slot's
//! replenishment; in joint mode also the energy whose service rate would
//! drain the queue), the battery and queue then update with two-sided
//! clamps. Battery discharge is the event that the clamp at zero
//! triggers; data loss is a strictly positive overflow past the buffer
//! capacity. Instantaneous utility is zeroed on slots where an empty
//! battery prevented the requested draw.

pub mod exact;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{RatePower, Utility};
use crate::policies::Policy;
use crate::processes::ProcessSource;
use crate::scalar::{real, SampleScalar, Scalar};
use crate::stats::{ci_half_width, mean, CompensatedSum};

/// Number of batch-means batches used for single-run confidence intervals.
const BATCHES_PER_RUN: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config ({field}): {message}")]
    Config { field: &'static str, message: String },
}

fn config_err<T>(field: &'static str, message: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::Config { field, message: message.into() })
}

/// Battery-only (infinitely backlogged buffer) or joint battery + finite
/// data buffer operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    BatteryOnly,
    Joint,
}

/// Battery and queue levels at one time slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState<S: Scalar> {
    pub battery: S,
    pub queue: S,
    pub slot: u64,
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord<S: Scalar> {
    pub consumed: S,
    pub service: S,
    pub utility: S,
    pub discharged: bool,
    pub battery_overflowed: bool,
    pub data_lost: S,
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig<S: Scalar> {
    pub mode: Mode,
    pub battery_capacity: S,
    /// Required in joint mode.
    pub buffer_capacity: Option<S>,
    pub horizon: u64,
    /// Slots excluded from metrics; defaults to `min(100_000, horizon / 10)`.
    pub warmup: Option<u64>,
    pub replenishment: ProcessSource<S>,
    /// Required in joint mode.
    pub arrivals: Option<ProcessSource<S>>,
    pub policy: Policy<S>,
    pub utility: Utility<S>,
    pub rate: RatePower<S>,
    pub seed: u64,
    /// Defaults to half the battery capacity.
    pub initial_battery: Option<S>,
    /// Defaults to half the buffer capacity.
    pub initial_queue: Option<S>,
}

impl<S: Scalar> SimConfig<S> {
    pub fn effective_warmup(&self) -> u64 {
        self.warmup.unwrap_or_else(|| (self.horizon / 10).min(100_000))
    }

    pub fn effective_initial_battery(&self) -> S {
        self.initial_battery.unwrap_or(self.battery_capacity * real::<S>(0.5))
    }

    pub fn effective_initial_queue(&self) -> S {
        match self.mode {
            Mode::Joint => self
                .initial_queue
                .unwrap_or(self.buffer_capacity.unwrap_or(S::zero()) * real::<S>(0.5)),
            Mode::BatteryOnly => S::zero(),
        }
    }

    /// Check the configuration; returns advisory warnings on success.
    pub fn validate(&self) -> Result<Vec<String>, SimError> {
        let mut warnings = Vec::new();
        if !(self.battery_capacity > S::zero()) {
            return config_err("battery_capacity", format!("must be positive, got {}", self.battery_capacity));
        }
        let warmup = self.effective_warmup();
        if self.horizon <= warmup {
            return config_err("horizon", format!("horizon {} must exceed warmup {warmup}", self.horizon));
        }
        let b0 = self.effective_initial_battery();
        if b0 < S::zero() || b0 > self.battery_capacity {
            return config_err("initial_battery", format!("{b0} outside [0, {}]", self.battery_capacity));
        }
        match self.mode {
            Mode::Joint => {
                let k = match self.buffer_capacity {
                    Some(k) if k > S::zero() => k,
                    Some(k) => return config_err("buffer_capacity", format!("must be positive, got {k}")),
                    None => return config_err("buffer_capacity", "required in joint mode"),
                };
                let arrivals = match &self.arrivals {
                    Some(a) => a,
                    None => return config_err("arrivals", "required in joint mode"),
                };
                let q0 = self.effective_initial_queue();
                if q0 < S::zero() || q0 > k {
                    return config_err("initial_queue", format!("{q0} outside [0, {k}]"));
                }
                let lambda = arrivals.declared_mean();
                let capacity = self.rate.rate(self.replenishment.declared_mean());
                if lambda >= capacity {
                    return config_err(
                        "arrivals",
                        format!(
                            "stability condition λ < C(µ) violated: arrival mean {lambda} >= channel rate {capacity} at the mean replenishment"
                        ),
                    );
                }
                // Large-battery regime check: the battery should hold far
                // more energy than a full buffer costs to serve.
                let buffer_energy = self.rate.inverse(lambda) * k;
                if self.battery_capacity < buffer_energy {
                    warnings.push(format!(
                        "battery capacity {} is below the energy {buffer_energy} needed to serve a full buffer; large-battery-regime predictions may be off",
                        self.battery_capacity
                    ));
                }
                warnings.extend(arrivals.warnings().iter().cloned());
            }
            Mode::BatteryOnly => {
                if self.policy.needs_queue() {
                    return config_err("policy", "scheme-q reads the queue state and cannot run in battery-only mode");
                }
                if self.arrivals.is_some() {
                    warnings.push("arrivals are ignored in battery-only mode".into());
                }
            }
        }
        warnings.extend(self.replenishment.warnings().iter().cloned());
        self.rare_event_warning(&mut warnings);
        Ok(warnings)
    }

    /// Warn when the diffusion-predicted event probability implies fewer
    /// than ~50 events over the measured horizon.
    fn rare_event_warning(&self, warnings: &mut Vec<String>) {
        let measured = self.horizon.saturating_sub(self.effective_warmup());
        if measured == 0 {
            return;
        }
        let sigma2 = match self.replenishment.declared_asym_var() {
            Some(v) if v > S::zero() => v,
            _ => return,
        };
        let battery_drift = match &self.policy {
            Policy::SchemeE { drift, .. } => Some(*drift),
            Policy::SchemeQ { drift_above, .. } => Some(*drift_above),
            Policy::SchemeB { drift, .. } => Some(*drift),
            _ => None,
        };
        if let Some(d) = battery_drift {
            // Scheme-b regulates to half full, so its effective barrier is
            // half the capacity; the constant-drift schemes see the full
            // capacity.
            let barrier = match &self.policy {
                Policy::SchemeB { .. } => self.battery_capacity * real::<S>(0.5),
                _ => self.battery_capacity,
            };
            let p = (-(real::<S>(2.0) * d * barrier) / sigma2).exp();
            let expected = p * real::<S>(measured as f64);
            if expected < real::<S>(50.0) {
                warnings.push(format!(
                    "predicted discharge probability {p:e} implies ~{expected:.1} events over {measured} measured slots; extend the horizon for a stable estimate"
                ));
            }
        }
    }
}

/// Advance one slot. `r` and `a` are this slot's replenishment and
/// arrival samples (`a` is ignored in battery-only mode).
///
/// Within-slot order: the policy requests a draw from the pre-update
/// state; the request is capped by the queue-drain energy (joint mode)
/// and by the available energy `battery + r`; service and utility follow;
/// then the battery and queue update under two-sided clamps. Energy is
/// conserved exactly: every consumed unit was stored or harvested.
pub fn step<S: Scalar>(
    state: &NodeState<S>,
    cfg: &SimConfig<S>,
    r: S,
    a: S,
) -> (NodeState<S>, SlotRecord<S>) {
    let raw = cfg.policy.raw_request(state.battery, state.queue);
    let mut request = raw;
    if cfg.mode == Mode::Joint {
        request = request.min(cfg.rate.inverse(state.queue.max(S::zero())));
    }
    let available = state.battery + r;
    let battery_capped = available < request;
    let consumed = if battery_capped { available } else { request }.max(S::zero());

    let service = cfg.rate.rate(consumed);
    let utility = if battery_capped {
        S::zero()
    } else {
        cfg.utility.eval(consumed, service)
    };

    let m = cfg.battery_capacity;
    let pre_battery = available - consumed;
    let discharged = pre_battery <= S::zero();
    let battery_overflowed = pre_battery > m;
    let battery = pre_battery.max(S::zero()).min(m);

    let (queue, data_lost) = match cfg.mode {
        Mode::Joint => {
            let k = cfg.buffer_capacity.unwrap_or(S::zero());
            let pre_queue = state.queue + a - service;
            let lost = (pre_queue - k).max(S::zero());
            (pre_queue.max(S::zero()).min(k), lost)
        }
        Mode::BatteryOnly => (state.queue, S::zero()),
    };

    (
        NodeState { battery, queue, slot: state.slot + 1 },
        SlotRecord { consumed, service, utility, discharged, battery_overflowed, data_lost },
    )
}

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<S: Scalar> {
    pub value: S,
    pub half_width: S,
}

/// Long-run metric estimates for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics<S: Scalar> {
    pub p_discharge: Estimate<S>,
    /// Present in joint mode only.
    pub p_loss: Option<Estimate<S>>,
    pub avg_utility: Estimate<S>,
    pub mean_energy: Estimate<S>,
    /// Batches (single run) or replications (batched run) behind the
    /// confidence intervals.
    pub n_batches: usize,
    pub slots_measured: u64,
}

/// Observer invoked once per simulated slot with the pre-update state.
pub trait SlotHook<S: Scalar> {
    fn record(&mut self, state: &NodeState<S>, record: &SlotRecord<S>, r: S, a: S);
}

/// No-op hook for metric-only runs.
pub struct NoopHook;

impl<S: Scalar> SlotHook<S> for NoopHook {
    #[inline]
    fn record(&mut self, _: &NodeState<S>, _: &SlotRecord<S>, _: S, _: S) {}
}

/// Run one simulation and estimate long-run metrics with in-run
/// batch-means confidence intervals.
pub fn run<S: SampleScalar>(cfg: &SimConfig<S>) -> Result<Metrics<S>, SimError> {
    run_with_hook(cfg, &mut NoopHook)
}

/// [`run`] with a per-slot observer (used for trace dumps and invariant
/// checks in tests).
pub fn run_with_hook<S: SampleScalar>(
    cfg: &SimConfig<S>,
    hook: &mut impl SlotHook<S>,
) -> Result<Metrics<S>, SimError> {
    cfg.validate()?;
    run_replication(cfg, 0, hook)
}

/// Write a per-slot trace as CSV (`slot,B,Q,e,service,r,a,discharged,lost`)
/// while running.
pub fn run_traced<S: SampleScalar>(
    cfg: &SimConfig<S>,
    writer: &mut impl std::io::Write,
) -> Result<Metrics<S>, SimError> {
    struct CsvHook<'w, W: std::io::Write> {
        writer: &'w mut W,
        failed: bool,
    }
    impl<S: Scalar, W: std::io::Write> SlotHook<S> for CsvHook<'_, W> {
        fn record(&mut self, state: &NodeState<S>, rec: &SlotRecord<S>, r: S, a: S) {
            if self.failed {
                return;
            }
            if writeln!(
                self.writer,
                "{},{},{},{},{},{},{},{},{}",
                state.slot,
                state.battery,
                state.queue,
                rec.consumed,
                rec.service,
                r,
                a,
                u8::from(rec.discharged),
                rec.data_lost
            )
            .is_err()
            {
                self.failed = true;
            }
        }
    }
    cfg.validate()?;
    writeln!(writer, "slot,B,Q,e,service,r,a,discharged,lost")
        .map_err(|e| SimError::Config { field: "trace", message: e.to_string() })?;
    let mut hook = CsvHook { writer, failed: false };
    run_replication(cfg, 0, &mut hook)
}

/// One replication. Replication `index` draws its replenishment and
/// arrival streams from RNG streams `2 * index` and `2 * index + 1` of
/// the configured seed, so replications are independent yet fully
/// deterministic.
fn run_replication<S: SampleScalar>(
    cfg: &SimConfig<S>,
    index: u64,
    hook: &mut impl SlotHook<S>,
) -> Result<Metrics<S>, SimError> {
    let warmup = cfg.effective_warmup();
    let measured = cfg.horizon - warmup;
    let n_batches = (measured as usize).min(BATCHES_PER_RUN);
    let batch_len = measured / n_batches as u64;

    let mut repl = cfg.replenishment.sampler(cfg.seed, 2 * index);
    let mut arrivals = cfg.arrivals.as_ref().map(|a| a.sampler(cfg.seed, 2 * index + 1));

    let mut state = NodeState {
        battery: cfg.effective_initial_battery(),
        queue: cfg.effective_initial_queue(),
        slot: 0,
    };

    let mut replenished = CompensatedSum::<S>::new();
    let mut consumed_total = CompensatedSum::<S>::new();

    let mut discharge_batches = Vec::with_capacity(n_batches);
    let mut loss_batches = Vec::with_capacity(n_batches);
    let mut utility_batches = Vec::with_capacity(n_batches);
    let mut energy_batches = Vec::with_capacity(n_batches);

    let mut in_batch = 0u64;
    let mut discharges = 0u64;
    let mut losses = 0u64;
    let mut utility_sum = CompensatedSum::<S>::new();
    let mut energy_sum = CompensatedSum::<S>::new();

    // Metrics cover warmup..warmup + batch_len * n_batches; any remainder
    // slots still run (and still appear in traces), they just fall outside
    // the batch statistics.
    let measured_end = warmup + batch_len * n_batches as u64;
    for t in 0..cfg.horizon {
        let r = repl.next_sample();
        let a = arrivals.as_mut().map_or(S::zero(), |s| s.next_sample());
        let (next, rec) = step(&state, cfg, r, a);
        hook.record(&state, &rec, r, a);
        replenished.add(r);
        consumed_total.add(rec.consumed);
        if t >= warmup && t < measured_end {
            discharges += u64::from(rec.discharged);
            losses += u64::from(rec.data_lost > S::zero());
            utility_sum.add(rec.utility);
            energy_sum.add(rec.consumed);
            in_batch += 1;
            if in_batch == batch_len {
                let len = real::<S>(batch_len as f64);
                discharge_batches.push(real::<S>(discharges as f64) / len);
                loss_batches.push(real::<S>(losses as f64) / len);
                utility_batches.push(utility_sum.value() / len);
                energy_batches.push(energy_sum.value() / len);
                in_batch = 0;
                discharges = 0;
                losses = 0;
                utility_sum = CompensatedSum::new();
                energy_sum = CompensatedSum::new();
            }
        }
        state = next;
    }

    // Energy conservation: everything consumed was stored initially or
    // harvested since. Violation means a bug in the state equations.
    let budget = replenished.value() + cfg.effective_initial_battery();
    let slack = real::<S>(1e-6) * budget.max(S::one());
    assert!(
        consumed_total.value() <= budget + slack,
        "energy conservation violated: consumed {} > replenished + initial {}",
        consumed_total.value(),
        budget
    );

    let estimate = |batches: &[S]| Estimate { value: mean(batches), half_width: ci_half_width(batches) };
    Ok(Metrics {
        p_discharge: estimate(&discharge_batches),
        p_loss: match cfg.mode {
            Mode::Joint => Some(estimate(&loss_batches)),
            Mode::BatteryOnly => None,
        },
        avg_utility: estimate(&utility_batches),
        mean_energy: estimate(&energy_batches),
        n_batches,
        slots_measured: batch_len * n_batches as u64,
    })
}

/// Run independent replications in parallel and combine them: the point
/// estimate is the mean of per-replication estimates and the half-width
/// comes from the across-replication variance (Student-t, 95%).
///
/// Replication seeds derive deterministically from `cfg.seed`, and
/// results are reduced in replication order, so the output does not
/// depend on the number of worker threads.
pub fn run_batched<S: SampleScalar>(
    cfg: &SimConfig<S>,
    n_replications: usize,
) -> Result<Metrics<S>, SimError> {
    if n_replications < 2 {
        return config_err("n_replications", "need at least 2 replications");
    }
    cfg.validate()?;
    let per_rep: Vec<Metrics<S>> = (0..n_replications as u64)
        .into_par_iter()
        .map(|i| run_replication(cfg, i, &mut NoopHook))
        .collect::<Result<_, _>>()?;

    let combine = |extract: &dyn Fn(&Metrics<S>) -> S| -> Estimate<S> {
        let values: Vec<S> = per_rep.iter().map(extract).collect();
        Estimate { value: mean(&values), half_width: ci_half_width(&values) }
    };
    Ok(Metrics {
        p_discharge: combine(&|m| m.p_discharge.value),
        p_loss: match cfg.mode {
            Mode::Joint => Some(combine(&|m| m.p_loss.as_ref().expect("joint metrics").value)),
            Mode::BatteryOnly => None,
        },
        avg_utility: combine(&|m| m.avg_utility.value),
        mean_energy: combine(&|m| m.mean_energy.value),
        n_batches: n_replications,
        slots_measured: per_rep.iter().map(|m| m.slots_measured).sum(),
    })
}
