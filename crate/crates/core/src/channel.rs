//! Rate-power and utility functions.
//!
//! The AWGN rate-power function maps a per-slot energy draw to a service
//! rate in bits per slot; utilities are concave non-decreasing rewards of
//! either the consumed energy or the transmitted rate.

use thiserror::Error;

use crate::scalar::{real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("energy must be nonnegative, got {0}")]
    NegativeEnergy(String),
    #[error("rate must be nonnegative, got {0}")]
    NegativeRate(String),
    #[error("channel SNR must be positive, got {0}")]
    NonPositiveSnr(String),
    #[error("rate slope must be positive, got {0}")]
    NonPositiveSlope(String),
    #[error("utility table invalid: {0}")]
    BadTable(String),
}

/// AWGN rate in bits per slot for energy `e` at linear SNR `gamma`:
/// `log2(1 + e * gamma)`.
pub fn awgn_rate<S: Scalar>(e: S, gamma: S) -> Result<S, ChannelError> {
    if gamma <= S::zero() {
        return Err(ChannelError::NonPositiveSnr(gamma.to_string()));
    }
    if e < S::zero() {
        return Err(ChannelError::NegativeEnergy(e.to_string()));
    }
    Ok((S::one() + e * gamma).log2())
}

/// Inverse of [`awgn_rate`]: energy needed for `rate` bits per slot,
/// `(2^rate - 1) / gamma`.
pub fn awgn_inverse_rate<S: Scalar>(rate: S, gamma: S) -> Result<S, ChannelError> {
    if gamma <= S::zero() {
        return Err(ChannelError::NonPositiveSnr(gamma.to_string()));
    }
    if rate < S::zero() {
        return Err(ChannelError::NegativeRate(rate.to_string()));
    }
    Ok((rate.exp2() - S::one()) / gamma)
}

/// Rate-power function C(e): bits deliverable per slot using energy e.
///
/// `Awgn` is the physical model. `Linear` (C(e) = slope * e) exists so that
/// exact-oracle configurations can stay on an integer lattice; it is also
/// handy in tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatePower<S: Scalar> {
    Awgn { gamma: S },
    Linear { slope: S },
}

impl<S: Scalar> RatePower<S> {
    pub fn awgn(gamma: S) -> Result<Self, ChannelError> {
        if gamma <= S::zero() {
            return Err(ChannelError::NonPositiveSnr(gamma.to_string()));
        }
        Ok(RatePower::Awgn { gamma })
    }

    pub fn linear(slope: S) -> Result<Self, ChannelError> {
        if slope <= S::zero() {
            return Err(ChannelError::NonPositiveSlope(slope.to_string()));
        }
        Ok(RatePower::Linear { slope })
    }

    /// C(e). Assumes e >= 0 (checked variants live in the free functions).
    #[inline]
    pub fn rate(&self, e: S) -> S {
        match *self {
            RatePower::Awgn { gamma } => (S::one() + e * gamma).log2(),
            RatePower::Linear { slope } => slope * e,
        }
    }

    /// C^-1(rate). Assumes rate >= 0.
    #[inline]
    pub fn inverse(&self, rate: S) -> S {
        match *self {
            RatePower::Awgn { gamma } => (rate.exp2() - S::one()) / gamma,
            RatePower::Linear { slope } => rate / slope,
        }
    }
}

/// Piecewise-linear concave non-decreasing function given by knots.
///
/// Validated at construction: x strictly increasing starting at 0, first
/// value 0, values non-decreasing, slopes non-increasing. Evaluation
/// interpolates linearly and extrapolates the last segment beyond the
/// final knot, which preserves concavity and monotonicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveTable<S: Scalar> {
    xs: Vec<S>,
    ys: Vec<S>,
}

impl<S: Scalar> ConcaveTable<S> {
    pub fn new(knots: &[(S, S)]) -> Result<Self, ChannelError> {
        if knots.len() < 2 {
            return Err(ChannelError::BadTable("need at least two knots".into()));
        }
        if knots[0].0 != S::zero() || knots[0].1 != S::zero() {
            return Err(ChannelError::BadTable("first knot must be (0, 0)".into()));
        }
        let tol = real::<S>(1e-12);
        let mut prev_slope = S::infinity();
        for w in knots.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if x1 <= x0 {
                return Err(ChannelError::BadTable("x values must be strictly increasing".into()));
            }
            if y1 + tol < y0 {
                return Err(ChannelError::BadTable("values must be non-decreasing".into()));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if slope > prev_slope + tol {
                return Err(ChannelError::BadTable("slopes must be non-increasing (concavity)".into()));
            }
            prev_slope = slope;
        }
        Ok(Self {
            xs: knots.iter().map(|k| k.0).collect(),
            ys: knots.iter().map(|k| k.1).collect(),
        })
    }

    pub fn eval(&self, x: S) -> S {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        // Segment index: last knot <= x, extrapolating past the end.
        let mut i = n - 1;
        for j in 1..n {
            if x <= self.xs[j] {
                i = j;
                break;
            }
        }
        let (x0, y0) = (self.xs[i - 1], self.ys[i - 1]);
        let (x1, y1) = (self.xs[i], self.ys[i]);
        let slope = (y1 - y0) / (x1 - x0);
        y0 + slope * (x - x0)
    }
}

/// Per-slot utility. All built-in kinds satisfy U(0) = 0, are
/// non-decreasing and concave.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility<S: Scalar> {
    /// U(e) = log2(1 + gamma * e), a reward of the consumed energy.
    LogCapacity { gamma: S },
    /// Rate utility applied to the service rate: U_D(c) = log2(1 + c).
    /// Strictly concave, so the rate-utility convergence scaling is
    /// observable (an identity U_D has zero curvature and hides it).
    RateLog,
    /// Tabulated concave function of consumed energy.
    EnergyTable(ConcaveTable<S>),
    /// Tabulated concave rate utility applied to the service rate.
    RateTable(ConcaveTable<S>),
}

impl<S: Scalar> Utility<S> {
    pub fn log_capacity(gamma: S) -> Result<Self, ChannelError> {
        if gamma <= S::zero() {
            return Err(ChannelError::NonPositiveSnr(gamma.to_string()));
        }
        Ok(Utility::LogCapacity { gamma })
    }

    /// Evaluate the utility of a slot that consumed energy `e` and served
    /// `service` bits.
    #[inline]
    pub fn eval(&self, e: S, service: S) -> S {
        match self {
            Utility::LogCapacity { gamma } => (S::one() + e * *gamma).log2(),
            Utility::RateLog => (S::one() + service).log2(),
            Utility::EnergyTable(t) => t.eval(e),
            Utility::RateTable(t) => t.eval(service),
        }
    }

    /// Checked evaluation of U(e) alone (service derived through `rate`).
    pub fn eval_checked(&self, e: S, rate: &RatePower<S>) -> Result<S, ChannelError> {
        if e < S::zero() {
            return Err(ChannelError::NegativeEnergy(e.to_string()));
        }
        Ok(self.eval(e, rate.rate(e)))
    }

    /// Long-run utility upper bound: U evaluated at the mean energy draw
    /// (battery-only kinds) or at the mean arrival rate (rate kinds).
    pub fn upper_bound(&self, mean_energy: S, mean_rate: S) -> S {
        match self {
            Utility::LogCapacity { gamma } => (S::one() + mean_energy * *gamma).log2(),
            Utility::RateLog => (S::one() + mean_rate).log2(),
            Utility::EnergyTable(t) => t.eval(mean_energy),
            Utility::RateTable(t) => t.eval(mean_rate),
        }
    }
}
