//! Small statistics helpers shared by the simulator and the process
//! estimators: compensated summation, sample moments and Student-t
//! quantiles for 95% confidence intervals.

use crate::scalar::{real, Scalar};

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<S: Scalar> {
    sum: S,
    carry: S,
}

impl<S: Scalar> Default for CompensatedSum<S> {
    fn default() -> Self {
        Self { sum: S::zero(), carry: S::zero() }
    }
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: S) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> S {
        self.sum
    }
}

/// Sample mean of a slice (zero for an empty slice).
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value() / real(values.len() as f64)
}

/// Unbiased sample variance (zero for fewer than two values).
pub fn sample_variance<S: Scalar>(values: &[S]) -> S {
    let n = values.len();
    if n < 2 {
        return S::zero();
    }
    let m = mean(values);
    let mut acc = CompensatedSum::new();
    for &v in values {
        let d = v - m;
        acc.add(d * d);
    }
    acc.value() / real((n - 1) as f64)
}

/// Two-sided 95% Student-t quantile (t such that P(|T| <= t) = 0.95) for
/// the given degrees of freedom. Falls back to the normal quantile for
/// large df.
pub fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match df {
        0 => f64::INFINITY,
        1..=30 => TABLE[df - 1],
        31..=40 => 2.021,
        41..=60 => 2.000,
        61..=120 => 1.980,
        _ => 1.960,
    }
}

/// Half-width of the 95% confidence interval for the mean of `values`,
/// treating them as i.i.d. observations.
pub fn ci_half_width<S: Scalar>(values: &[S]) -> S {
    let n = values.len();
    if n < 2 {
        return S::zero();
    }
    let var = sample_variance(values);
    let t = real::<S>(t_quantile_975(n - 1));
    t * (var / real(n as f64)).sqrt()
}

/// Ordinary least squares fit of y = intercept + slope * x.
/// Returns (slope, intercept, r_squared). Requires at least two points
/// with distinct x values.
pub fn ols<S: Scalar>(xs: &[S], ys: &[S]) -> Option<(S, S, S)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let xm = mean(xs);
    let ym = mean(ys);
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    let mut syy = S::zero();
    for i in 0..n {
        let dx = xs[i] - xm;
        let dy = ys[i] - ym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == S::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut ss_res = S::zero();
    for i in 0..n {
        let resid = ys[i] - (intercept + slope * xs[i]);
        ss_res += resid * resid;
    }
    let r2 = if syy == S::zero() {
        // All y equal: a horizontal line fits exactly.
        S::one()
    } else {
        (S::one() - ss_res / syy).max(S::zero())
    };
    Some((slope, intercept, r2))
}
