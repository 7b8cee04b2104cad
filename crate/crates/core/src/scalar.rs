//! Scalar abstraction: the whole crate is generic over the floating-point
//! type through [`Scalar`], with `f64` as the default via [`crate::Real`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, StandardUniform};

/// Floating-point scalar used for state, samples and statistics.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Random sampling primitives for a scalar type.
///
/// Keeps the `rand_distr` trait bounds out of every downstream signature;
/// only process generators need these.
pub trait SampleScalar: Scalar {
    /// One standard-normal draw.
    fn standard_normal(rng: &mut ChaCha8Rng) -> Self;
    /// One uniform draw on [0, 1).
    fn uniform01(rng: &mut ChaCha8Rng) -> Self;
    /// One Poisson draw with the given mean (mean > 0).
    fn poisson(mean: Self, rng: &mut ChaCha8Rng) -> Self;
}

macro_rules! impl_sample_scalar {
    ($t:ty) => {
        impl SampleScalar for $t {
            fn standard_normal(rng: &mut ChaCha8Rng) -> Self {
                StandardNormal.sample(rng)
            }
            fn uniform01(rng: &mut ChaCha8Rng) -> Self {
                StandardUniform.sample(rng)
            }
            fn poisson(mean: Self, rng: &mut ChaCha8Rng) -> Self {
                Poisson::new(mean)
                    .expect("poisson mean must be positive and finite")
                    .sample(rng)
            }
        }
    };
}

impl_sample_scalar!(f32);
impl_sample_scalar!(f64);

/// Convert an `f64` constant into the scalar type.
///
/// Panics only if the value is not representable, which cannot happen for
/// the finite constants used throughout this crate.
#[inline]
pub fn real<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("constant representable in scalar type")
}
