//! Replenishment and arrival process generators.
//!
//! A [`ProcessSource`] is an immutable description of an ergodic
//! discrete-time process with known (or estimable) per-slot mean and
//! asymptotic variance. Sampling state lives in a [`Sampler`] owned by one
//! run; identical seeds produce bit-identical streams.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::{real, SampleScalar, Scalar};
use crate::stats::{ci_half_width, mean, sample_variance, CompensatedSum};

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("invalid process parameter: {0}")]
    Parameter(String),
    #[error("invalid trace input: {0}")]
    Input(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("no closed-form log-MGF for this source kind ({0}); use the empirical estimator")]
    UnsupportedLogMgf(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
enum Kind<S: Scalar> {
    /// I.i.d. Gaussian clamped below at zero. Declared statistics are the
    /// pre-clamp values; with mean >= 3 sigma the clamping bias is
    /// negligible and a warning is attached otherwise.
    GaussianIid { mean: S, var: S },
    /// Two-state Markov-modulated Poisson process: the hidden chain steps
    /// each slot, then a Poisson sample with the current state's mean is
    /// emitted.
    Mmpp {
        transition: [[S; 2]; 2],
        state_means: [S; 2],
        stationary0: S,
    },
    /// Cyclic replay of a fixed nonnegative sequence (already scaled).
    Trace { values: Arc<Vec<S>> },
    /// Synthetic diurnal profile: half-sine day, zero night, replayed
    /// cyclically. Stored as one precomputed period.
    Diurnal { values: Arc<Vec<S>> },
    /// I.i.d. draws from a finite support with given probabilities. This
    /// is the kind the exact chain oracle accepts.
    Discrete { values: Vec<S>, cum_probs: Vec<S> },
}

/// Immutable description of a replenishment or arrival process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSource<S: Scalar> {
    kind: Kind<S>,
    declared_mean: S,
    declared_asym_var: Option<S>,
    warnings: Vec<String>,
}

impl<S: Scalar> ProcessSource<S> {
    /// I.i.d. Gaussian(mean, var) clamped below at zero. `var = 0` gives
    /// the degenerate constant process.
    pub fn gaussian_iid(mean: S, var: S) -> Result<Self, ProcessError> {
        if !(mean > S::zero()) {
            return Err(ProcessError::Parameter(format!("gaussian mean must be positive, got {mean}")));
        }
        if var < S::zero() {
            return Err(ProcessError::Parameter(format!("gaussian variance must be nonnegative, got {var}")));
        }
        let mut warnings = Vec::new();
        if var > S::zero() && mean < real::<S>(3.0) * var.sqrt() {
            warnings.push(format!(
                "gaussian source has mean {mean} < 3 sigma ({}); zero-clamping will bias declared statistics",
                var.sqrt()
            ));
        }
        Ok(Self {
            kind: Kind::GaussianIid { mean, var },
            declared_mean: mean,
            declared_asym_var: Some(var),
            warnings,
        })
    }

    /// Degenerate constant process emitting `value` every slot.
    pub fn constant(value: S) -> Result<Self, ProcessError> {
        Self::gaussian_iid(value, S::zero())
    }

    /// Two-state MMPP with row-stochastic `transition` and per-state
    /// Poisson means. The chain must be irreducible.
    pub fn mmpp(transition: [[S; 2]; 2], state_means: [S; 2]) -> Result<Self, ProcessError> {
        let tol = real::<S>(1e-9);
        for (i, row) in transition.iter().enumerate() {
            for &p in row {
                if p < S::zero() || p > S::one() {
                    return Err(ProcessError::Parameter(format!(
                        "transition entry {p} in row {i} outside [0, 1]"
                    )));
                }
            }
            let sum = row[0] + row[1];
            if (sum - S::one()).abs() > tol {
                return Err(ProcessError::Parameter(format!("transition row {i} sums to {sum}, not 1")));
            }
        }
        for &m in &state_means {
            if m < S::zero() {
                return Err(ProcessError::Parameter(format!("state mean {m} must be nonnegative")));
            }
        }
        let leave0 = transition[0][1];
        let leave1 = transition[1][0];
        if leave0 <= S::zero() || leave1 <= S::zero() {
            return Err(ProcessError::Parameter(
                "chain is reducible (a state can never be left); stationary mean undefined".into(),
            ));
        }
        let stationary0 = leave1 / (leave0 + leave1);
        let stationary1 = S::one() - stationary0;
        let mixture_mean = stationary0 * state_means[0] + stationary1 * state_means[1];
        // Asymptotic variance has a closed form: the conditional Poisson
        // part contributes the mixture mean, the modulating chain
        // contributes its own asymptotic variance with geometric
        // autocorrelation at the second eigenvalue.
        let eig = S::one() - leave0 - leave1;
        let diff = state_means[0] - state_means[1];
        let modulator = stationary0 * stationary1 * diff * diff * (S::one() + eig) / (S::one() - eig);
        let asym_var = mixture_mean + modulator;
        Ok(Self {
            kind: Kind::Mmpp { transition, state_means, stationary0 },
            declared_mean: mixture_mean,
            declared_asym_var: Some(asym_var),
            warnings: Vec::new(),
        })
    }

    /// Cyclic replay of the nonnegative values in a text file (one value
    /// per line, `#` comments and an optional header line allowed),
    /// multiplied by `scale`.
    pub fn trace_from_path(path: &Path, scale: S) -> Result<Self, ProcessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProcessError::Input(format!("cannot read {}: {e}", path.display())))?;
        let mut values = Vec::new();
        let mut saw_data = false;
        for (lineno, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            match t.parse::<f64>() {
                Ok(v) => {
                    if v < 0.0 {
                        return Err(ProcessError::Input(format!(
                            "negative entry {v} at line {}",
                            lineno + 1
                        )));
                    }
                    values.push(real::<S>(v));
                    saw_data = true;
                }
                Err(_) if !saw_data => {
                    // One non-numeric header line is tolerated.
                    saw_data = true;
                }
                Err(_) => {
                    return Err(ProcessError::Input(format!(
                        "unparseable entry {t:?} at line {}",
                        lineno + 1
                    )));
                }
            }
        }
        Self::trace_from_values(values, scale)
    }

    /// Cyclic replay of an in-memory trace, multiplied by `scale`.
    pub fn trace_from_values(values: Vec<S>, scale: S) -> Result<Self, ProcessError> {
        if values.is_empty() {
            return Err(ProcessError::Input("trace is empty".into()));
        }
        if scale < S::zero() {
            return Err(ProcessError::Parameter(format!("scale must be nonnegative, got {scale}")));
        }
        if values.iter().any(|v| *v < S::zero()) {
            return Err(ProcessError::Input("trace contains a negative entry".into()));
        }
        let scaled: Vec<S> = values.iter().map(|&v| v * scale).collect();
        let mut acc = CompensatedSum::new();
        for &v in &scaled {
            acc.add(v);
        }
        let mean = acc.value() / real(scaled.len() as f64);
        Ok(Self {
            kind: Kind::Trace { values: Arc::new(scaled) },
            declared_mean: mean,
            declared_asym_var: None,
            warnings: Vec::new(),
        })
    }

    /// Synthetic diurnal profile: a half-sine of the given peak over the
    /// daylight fraction of each period, zero otherwise.
    pub fn diurnal(peak: S, period_slots: usize, day_fraction: S) -> Result<Self, ProcessError> {
        if peak <= S::zero() {
            return Err(ProcessError::Parameter(format!("peak must be positive, got {peak}")));
        }
        if period_slots < 2 {
            return Err(ProcessError::Parameter("period must be at least 2 slots".into()));
        }
        if day_fraction <= S::zero() || day_fraction > S::one() {
            return Err(ProcessError::Parameter(format!(
                "day fraction must lie in (0, 1], got {day_fraction}"
            )));
        }
        let day_slots = (real::<S>(period_slots as f64) * day_fraction)
            .round()
            .to_usize()
            .unwrap_or(0)
            .max(1);
        let mut values = Vec::with_capacity(period_slots);
        let mut acc = CompensatedSum::new();
        for i in 0..period_slots {
            let v = if i < day_slots {
                let phase = real::<S>(i as f64) / real::<S>(day_slots as f64);
                peak * (S::PI() * phase).sin()
            } else {
                S::zero()
            };
            acc.add(v);
            values.push(v);
        }
        let mean = acc.value() / real(period_slots as f64);
        Ok(Self {
            kind: Kind::Diurnal { values: Arc::new(values) },
            declared_mean: mean,
            declared_asym_var: None,
            warnings: Vec::new(),
        })
    }

    /// I.i.d. draws from `(value, probability)` pairs. Probabilities must
    /// sum to one; values must be nonnegative.
    pub fn discrete(support: &[(S, S)]) -> Result<Self, ProcessError> {
        if support.is_empty() {
            return Err(ProcessError::Parameter("discrete support is empty".into()));
        }
        let tol = real::<S>(1e-9);
        let mut total = S::zero();
        let mut mean = S::zero();
        let mut second = S::zero();
        let mut values = Vec::with_capacity(support.len());
        let mut cum_probs = Vec::with_capacity(support.len());
        for &(v, p) in support {
            if v < S::zero() {
                return Err(ProcessError::Parameter(format!("discrete value {v} must be nonnegative")));
            }
            if p < S::zero() {
                return Err(ProcessError::Parameter(format!("probability {p} must be nonnegative")));
            }
            total += p;
            mean += p * v;
            second += p * v * v;
            values.push(v);
            cum_probs.push(total);
        }
        if (total - S::one()).abs() > tol {
            return Err(ProcessError::Parameter(format!("probabilities sum to {total}, not 1")));
        }
        if let Some(last) = cum_probs.last_mut() {
            *last = S::one();
        }
        Ok(Self {
            kind: Kind::Discrete { values, cum_probs },
            declared_mean: mean,
            declared_asym_var: Some(second - mean * mean),
            warnings: Vec::new(),
        })
    }

    /// Declared per-slot mean.
    pub fn declared_mean(&self) -> S {
        self.declared_mean
    }

    /// Declared per-slot asymptotic variance, when known in closed form.
    pub fn declared_asym_var(&self) -> Option<S> {
        self.declared_asym_var
    }

    /// Construction warnings (e.g. heavy zero-clamping).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Finite support as `(value, probability)` pairs, if this is a
    /// discrete source. The exact chain oracle requires this.
    pub fn finite_support(&self) -> Option<Vec<(S, S)>> {
        match &self.kind {
            Kind::Discrete { values, cum_probs } => {
                let mut out = Vec::with_capacity(values.len());
                let mut prev = S::zero();
                for (&v, &c) in values.iter().zip(cum_probs) {
                    out.push((v, c - prev));
                    prev = c;
                }
                Some(out)
            }
            Kind::GaussianIid { mean, var } if *var == S::zero() => Some(vec![(*mean, S::one())]),
            _ => None,
        }
    }

    /// Sampling context seeded deterministically; `stream` separates
    /// independent uses of the same seed (e.g. replenishment vs arrivals,
    /// replication indices).
    pub fn sampler(&self, seed: u64, stream: u64) -> Sampler<'_, S>
    where
        S: SampleScalar,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let chain_state = match &self.kind {
            Kind::Mmpp { stationary0, .. } => {
                let u = S::uniform01(&mut rng);
                usize::from(u >= *stationary0)
            }
            _ => 0,
        };
        Sampler { source: self, rng, chain_state, cursor: 0 }
    }

    /// Semi-invariant log-MGF per slot, where a closed form exists:
    /// Gaussian `mean*s + var*s^2/2`, i.i.d. Poisson `c*(e^s - 1)` (an
    /// MMPP with equal state means), and finite discrete supports.
    pub fn analytic_log_mgf(&self, s: S) -> Result<S, ProcessError> {
        let half = real::<S>(0.5);
        match &self.kind {
            Kind::GaussianIid { mean, var } => Ok(*mean * s + *var * s * s * half),
            Kind::Mmpp { state_means, .. } => {
                if (state_means[0] - state_means[1]).abs() <= real::<S>(1e-12) {
                    Ok(state_means[0] * (s.exp() - S::one()))
                } else {
                    Err(ProcessError::UnsupportedLogMgf("mmpp with distinct state means"))
                }
            }
            Kind::Discrete { values, cum_probs } => {
                let mut acc = S::zero();
                let mut prev = S::zero();
                for (&v, &c) in values.iter().zip(cum_probs) {
                    acc += (c - prev) * (s * v).exp();
                    prev = c;
                }
                Ok(acc.ln())
            }
            Kind::Trace { .. } => Err(ProcessError::UnsupportedLogMgf("trace replay")),
            Kind::Diurnal { .. } => Err(ProcessError::UnsupportedLogMgf("diurnal profile")),
        }
    }
}

/// Owned sampling state over a borrowed source.
#[derive(Debug, Clone)]
pub struct Sampler<'a, S: SampleScalar> {
    source: &'a ProcessSource<S>,
    rng: ChaCha8Rng,
    chain_state: usize,
    cursor: usize,
}

impl<S: SampleScalar> Sampler<'_, S> {
    /// Emit one slot's value and advance the state deterministically.
    #[inline]
    pub fn next_sample(&mut self) -> S {
        match &self.source.kind {
            Kind::GaussianIid { mean, var } => {
                if *var == S::zero() {
                    *mean
                } else {
                    let z = S::standard_normal(&mut self.rng);
                    (*mean + var.sqrt() * z).max(S::zero())
                }
            }
            Kind::Mmpp { transition, state_means, .. } => {
                let u = S::uniform01(&mut self.rng);
                self.chain_state = usize::from(u >= transition[self.chain_state][0]);
                let m = state_means[self.chain_state];
                if m > S::zero() {
                    S::poisson(m, &mut self.rng)
                } else {
                    S::zero()
                }
            }
            Kind::Trace { values } | Kind::Diurnal { values } => {
                let v = values[self.cursor];
                self.cursor += 1;
                if self.cursor == values.len() {
                    self.cursor = 0;
                }
                v
            }
            Kind::Discrete { values, cum_probs } => {
                let u = S::uniform01(&mut self.rng);
                let mut idx = values.len() - 1;
                for (i, &c) in cum_probs.iter().enumerate() {
                    if u < c {
                        idx = i;
                        break;
                    }
                }
                values[idx]
            }
        }
    }
}

/// Sample mean and batch-means asymptotic variance of a process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymStats<S: Scalar> {
    pub mean: S,
    pub asym_var: S,
    pub mean_half_width: S,
    pub n_samples: u64,
    pub batch_len: u64,
}

/// Estimate the per-slot mean and asymptotic variance by the batch-means
/// method: `asym_var = batch_len * Var(batch means)`, a consistent
/// estimator for mixing processes.
pub fn estimate_asymptotic_stats<S: SampleScalar>(
    source: &ProcessSource<S>,
    horizon: u64,
    batch_len: u64,
    seed: u64,
) -> Result<AsymStats<S>, ProcessError> {
    if batch_len < 1 {
        return Err(ProcessError::Estimation("batch length must be at least 1".into()));
    }
    if horizon < 100 * batch_len {
        return Err(ProcessError::Estimation(format!(
            "horizon {horizon} too short: need at least 100 batches of length {batch_len}"
        )));
    }
    let n_batches = (horizon / batch_len) as usize;
    let mut sampler = source.sampler(seed, 0);
    let mut batch_means = Vec::with_capacity(n_batches);
    for _ in 0..n_batches {
        let mut acc = CompensatedSum::new();
        for _ in 0..batch_len {
            acc.add(sampler.next_sample());
        }
        batch_means.push(acc.value() / real(batch_len as f64));
    }
    let m = mean(&batch_means);
    let asym_var = real::<S>(batch_len as f64) * sample_variance(&batch_means);
    Ok(AsymStats {
        mean: m,
        asym_var,
        mean_half_width: ci_half_width(&batch_means),
        n_samples: n_batches as u64 * batch_len,
        batch_len,
    })
}
