//! Theoretical predictions and empirical fits.
//!
//! The centerpiece is the nonzero root `s*` of the drift log-MGF
//! `Λ_d(s) = Λ(s) - s * offset`: its sign-side encodes which boundary the
//! process fights, and `exp(s* * barrier)` is the predicted
//! boundary-hitting probability. Diffusion and renewal closed forms cover
//! the constant-drift schemes, and decay-exponent regression turns sweep
//! measurements into fitted scaling laws.

use thiserror::Error;

use crate::channel::RatePower;
use crate::scalar::{real, Scalar};
use crate::stats::{ols, CompensatedSum};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("log-MGF must vanish at zero (got {0})")]
    RootPrecondition(String),
    #[error("no root on the requested side: {0}")]
    NoRoot(String),
    #[error("root refinement failed: {0}")]
    Convergence(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("numeric range exceeded: {0}")]
    Range(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Which sign of root to look for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSide {
    /// Positive mean drift, root below zero (boundary below).
    Negative,
    /// Negative mean drift, root above zero (boundary above).
    Positive,
}

/// Nonzero root `s*` of `Λ_d(s) = log_mgf(s) - s * drift_offset` on the
/// requested side, by bracket expansion and bisection. `Λ_d` is convex
/// with `Λ_d(0) = 0`, so exactly one nonzero root exists on a side when
/// the drift sign matches; a wrong drift sign (no exponential decay rate)
/// is reported as [`AnalysisError::NoRoot`].
pub fn ld_root<S: Scalar>(
    log_mgf: impl Fn(S) -> S,
    drift_offset: S,
    side: RootSide,
) -> Result<S, AnalysisError> {
    let lambda_d = |s: S| log_mgf(s) - s * drift_offset;

    let at_zero = lambda_d(S::zero());
    if at_zero.abs() > real::<S>(1e-12) {
        return Err(AnalysisError::RootPrecondition(at_zero.to_string()));
    }
    let h = real::<S>(1e-7);
    let slope0 = (lambda_d(h) - lambda_d(-h)) / (h + h);
    let dir = match side {
        RootSide::Negative => {
            if slope0 <= S::zero() {
                return Err(AnalysisError::NoRoot(format!(
                    "mean drift {slope0} is not positive, so no negative root exists"
                )));
            }
            -S::one()
        }
        RootSide::Positive => {
            if slope0 >= S::zero() {
                return Err(AnalysisError::NoRoot(format!(
                    "mean drift {slope0} is not negative, so no positive decay rate exists"
                )));
            }
            S::one()
        }
    };

    // Along the ray s = dir * t, g(t) is convex with g(0) = 0 and
    // negative initial slope: find t_neg inside the dip, then t_pos past
    // the root.
    let g = |t: S| lambda_d(dir * t);
    let mut t_neg = real::<S>(1e-3);
    let mut shrink = 0;
    while !(g(t_neg) < S::zero()) {
        t_neg *= real::<S>(0.5);
        shrink += 1;
        if shrink > 1000 {
            return Err(AnalysisError::NoRoot("drift is numerically zero".into()));
        }
    }
    let mut t_pos = t_neg * real::<S>(2.0);
    let mut grow = 0;
    loop {
        let v = g(t_pos);
        if v.is_nan() {
            return Err(AnalysisError::Convergence(format!("log-MGF returned NaN at s = {}", dir * t_pos)));
        }
        if v > S::zero() {
            break;
        }
        t_pos *= real::<S>(2.0);
        grow += 1;
        if grow > 2000 {
            return Err(AnalysisError::NoRoot(
                "log-MGF never crosses zero on this side (no finite decay rate)".into(),
            ));
        }
    }

    let mut lo = t_neg; // g(lo) < 0
    let mut hi = t_pos; // g(hi) > 0
    for _ in 0..200 {
        let mid = (lo + hi) * real::<S>(0.5);
        let v = g(mid);
        if v == S::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if v < S::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= hi.abs() * S::epsilon() {
            break;
        }
    }
    let root = dir * (lo + hi) * real::<S>(0.5);
    let residual = lambda_d(root).abs();
    let tol = real::<S>(1e-10).max(S::epsilon() * real::<S>(100.0));
    if residual > tol {
        return Err(AnalysisError::Convergence(format!("residual {residual} at root {root}")));
    }
    Ok(root)
}

/// Verify the second-order root expansion: the slope of `s*(drift)` at
/// zero drift equals `-2 / sigma2`. Returns the relative error of the
/// numerically extrapolated slope against that value.
pub fn variance_slope_check<S: Scalar>(
    log_mgf: impl Fn(S) -> S,
    sigma2: S,
) -> Result<S, AnalysisError> {
    if sigma2 <= S::zero() {
        return Err(AnalysisError::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let h = real::<S>(1e-6);
    let mean = (log_mgf(h) - log_mgf(-h)) / (h + h);
    let slope_at = |drift: S| -> Result<S, AnalysisError> {
        let root = ld_root(&log_mgf, mean - drift, RootSide::Negative)?;
        Ok(root / drift)
    };
    let d1 = real::<S>(1e-3);
    let d2 = real::<S>(1e-4);
    let g1 = slope_at(d1)?;
    let g2 = slope_at(d2)?;
    // s*(d)/d is linear in d to leading order; extrapolate to d = 0.
    let extrapolated = (d1 * g2 - d2 * g1) / (d1 - d2);
    let target = -real::<S>(2.0) / sigma2;
    Ok((extrapolated - target).abs() / target.abs())
}

/// Discharge-probability prediction for the battery-threshold scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeBPrediction<S: Scalar> {
    /// Drift used at this capacity: `order * asym_var * ln(M) / M`.
    pub drift: S,
    /// Exact root of the drift log-MGF.
    pub root: S,
    /// Polynomial decay order of the predicted probability.
    pub exponent: S,
    /// Pre-asymptotic point value `exp(root * capacity / 2)`; the barrier
    /// is half the capacity because the scheme regulates to half full.
    pub point_value: S,
}

/// Predict the discharge probability of the battery-threshold scheme at
/// one capacity, using the exact root rather than its small-drift
/// approximation.
pub fn predict_discharge_scheme_b<S: Scalar>(
    log_mgf: impl Fn(S) -> S,
    mean: S,
    asym_var: S,
    order: S,
    capacity: S,
) -> Result<SchemeBPrediction<S>, AnalysisError> {
    if order < real::<S>(2.0) {
        return Err(AnalysisError::Domain(format!("order must be at least 2, got {order}")));
    }
    if capacity <= S::one() || asym_var <= S::zero() {
        return Err(AnalysisError::Domain("capacity must exceed 1 and asym_var must be positive".into()));
    }
    let drift = order * asym_var * capacity.ln() / capacity;
    if drift >= mean {
        return Err(AnalysisError::Domain(format!(
            "derived drift {drift} reaches the mean {mean}; capacity too small"
        )));
    }
    let root = ld_root(log_mgf, mean - drift, RootSide::Negative)?;
    Ok(SchemeBPrediction {
        drift,
        root,
        exponent: order,
        point_value: (root * capacity * real::<S>(0.5)).exp(),
    })
}

fn check_diffusion_args<S: Scalar>(drift: S, sigma2: S, size: S) -> Result<(), AnalysisError> {
    if drift <= S::zero() {
        return Err(AnalysisError::Domain(format!("drift must be positive, got {drift}")));
    }
    if sigma2 <= S::zero() {
        return Err(AnalysisError::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if size < S::zero() {
        return Err(AnalysisError::Domain(format!("size must be nonnegative, got {size}")));
    }
    Ok(())
}

/// Diffusion underflow probability for a constant positive drift toward a
/// reflecting boundary `size` away: `exp(-2 * drift * size / sigma2)`.
pub fn diffusion_underflow<S: Scalar>(drift: S, sigma2: S, size: S) -> Result<S, AnalysisError> {
    check_diffusion_args(drift, sigma2, size)?;
    Ok((-(real::<S>(2.0) * drift * size) / sigma2).exp())
}

/// Renewal-reward overflow formula for the queue-threshold scheme:
/// `(queue_drift^2 / sigma2) * exp(-queue_drift * size / sigma2)`.
pub fn renewal_overflow<S: Scalar>(queue_drift: S, sigma2: S, size: S) -> Result<S, AnalysisError> {
    check_diffusion_args(queue_drift, sigma2, size)?;
    Ok(queue_drift * queue_drift / sigma2 * (-(queue_drift * size) / sigma2).exp())
}

/// Overflow probability for the constant-draw scheme:
/// `exp(-2 * queue_drift * size / sigma2)`.
pub fn scheme_e_overflow<S: Scalar>(queue_drift: S, sigma2: S, size: S) -> Result<S, AnalysisError> {
    check_diffusion_args(queue_drift, sigma2, size)?;
    Ok((-(real::<S>(2.0) * queue_drift * size) / sigma2).exp())
}

/// One operating point of the discharge/loss exponent tradeoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint<S: Scalar> {
    pub drift: S,
    /// Discharge decay exponent per unit of battery capacity.
    pub discharge_exponent: S,
    /// Loss decay exponent per unit of buffer capacity.
    pub loss_exponent: S,
}

/// Exponent tradeoff of the constant-draw scheme over a grid of drifts in
/// the open interval `(0, mean - C^-1(arrival_mean))`:
/// discharge exponent `2 * drift / sigma_r2` rises while loss exponent
/// `2 * (C(mean - drift) - arrival_mean) / sigma_a2` falls.
pub fn tradeoff_curve<S: Scalar>(
    mean: S,
    arrival_mean: S,
    gamma: S,
    sigma_r2: S,
    sigma_a2: S,
    n_grid: usize,
) -> Result<Vec<TradeoffPoint<S>>, AnalysisError> {
    if n_grid < 2 {
        return Err(AnalysisError::Domain("need at least 2 grid points".into()));
    }
    if sigma_r2 <= S::zero() || sigma_a2 <= S::zero() {
        return Err(AnalysisError::Domain("asymptotic variances must be positive".into()));
    }
    let rate = RatePower::awgn(gamma).map_err(|e| AnalysisError::Domain(e.to_string()))?;
    let capacity = rate.rate(mean);
    if arrival_mean >= capacity {
        return Err(AnalysisError::Domain(format!(
            "stability condition λ < C(µ) violated: {arrival_mean} >= {capacity}"
        )));
    }
    let upper = mean - rate.inverse(arrival_mean);
    let two = real::<S>(2.0);
    let denom = real::<S>((n_grid + 1) as f64);
    let mut points = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let drift = upper * real::<S>((i + 1) as f64) / denom;
        points.push(TradeoffPoint {
            drift,
            discharge_exponent: two * drift / sigma_r2,
            loss_exponent: two * (rate.rate(mean - drift) - arrival_mean) / sigma_a2,
        });
    }
    Ok(points)
}

/// Decay law hypothesis for [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `p ~ size^-exponent`: fit ln p against ln size.
    Polynomial,
    /// `p ~ exp(-exponent * size)`: fit ln p against size.
    Exponential,
}

impl DecayModel {
    pub fn name(&self) -> &'static str {
        match self {
            DecayModel::Polynomial => "polynomial",
            DecayModel::Exponential => "exponential",
        }
    }
}

/// Fitted decay law from (size, probability) observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<S: Scalar> {
    pub model: DecayModel,
    /// Magnitude of the fitted slope.
    pub exponent: S,
    pub intercept: S,
    pub r_squared: S,
    /// Points actually used.
    pub n_points: usize,
    /// Points dropped for zero (or negative) probability; report these so
    /// callers can extend horizons instead of silently fitting less data.
    pub n_dropped: usize,
}

/// Least-squares decay fit; zero-probability points (no observed events)
/// are excluded and counted in `n_dropped`.
pub fn fit_decay<S: Scalar>(points: &[(S, S)], model: DecayModel) -> Result<DecayFit<S>, AnalysisError> {
    let usable: Vec<(S, S)> = points
        .iter()
        .copied()
        .filter(|&(size, p)| p > S::zero() && size > S::zero())
        .collect();
    let n_dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(AnalysisError::Fit(format!(
            "need at least 3 usable points, have {} ({n_dropped} dropped for zero probability)",
            usable.len()
        )));
    }
    let xs: Vec<S> = usable
        .iter()
        .map(|&(size, _)| match model {
            DecayModel::Polynomial => size.ln(),
            DecayModel::Exponential => size,
        })
        .collect();
    let ys: Vec<S> = usable.iter().map(|&(_, p)| p.ln()).collect();
    let (slope, intercept, r_squared) =
        ols(&xs, &ys).ok_or_else(|| AnalysisError::Fit("sizes must be distinct".into()))?;
    Ok(DecayFit {
        model,
        exponent: slope.abs(),
        intercept,
        r_squared,
        n_points: usable.len(),
        n_dropped,
    })
}

/// Customary block length for [`empirical_log_mgf`].
pub const DEFAULT_BLOCK_LEN: usize = 100;

/// Block-based empirical log-MGF estimator for sources without a closed
/// form: partition `samples` into blocks of `block_len`
/// ([`DEFAULT_BLOCK_LEN`] is the customary choice), return
/// `ln(mean(exp(s * block_sum))) / block_len`.
pub fn empirical_log_mgf<S: Scalar>(
    samples: &[S],
    s: S,
    block_len: usize,
) -> Result<S, AnalysisError> {
    if block_len == 0 {
        return Err(AnalysisError::Domain("block length must be positive".into()));
    }
    let n_blocks = samples.len() / block_len;
    if n_blocks < 2 {
        return Err(AnalysisError::InsufficientData(format!(
            "{} samples form {n_blocks} blocks of {block_len}; need at least 2",
            samples.len()
        )));
    }
    if s == S::zero() {
        return Ok(S::zero());
    }
    let mut acc = CompensatedSum::new();
    for block in samples.chunks_exact(block_len) {
        let mut sum = CompensatedSum::new();
        for &v in block {
            sum.add(v);
        }
        let term = (s * sum.value()).exp();
        if !term.is_finite() {
            return Err(AnalysisError::Range(format!(
                "exp overflow at s = {s}; retry with a smaller |s| or shorter blocks"
            )));
        }
        acc.add(term);
    }
    let mean = acc.value() / real(n_blocks as f64);
    Ok(mean.ln() / real(block_len as f64))
}
