//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real scalar the simulation and theory code is generic over: `f32` or `f64`.
///
/// Math goes through [`RealField`] (nalgebra/simba), conversions through
/// num-traits.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Machine epsilon.
    const EPSILON: Self;

    fn infinity() -> Self;

    fn nan() -> Self;

    /// Smallest positive normal value.
    fn tiny() -> Self;

    /// Draw one standard normal variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless for literals that fit; panics only on values that cannot be
    /// represented at all (never the case for finite `f64` into `f32`).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const EPSILON: Self = f64::EPSILON;

    fn infinity() -> Self {
        f64::INFINITY
    }

    fn nan() -> Self {
        f64::NAN
    }

    fn tiny() -> Self {
        f64::MIN_POSITIVE
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    const EPSILON: Self = f32::EPSILON;

    fn infinity() -> Self {
        f32::INFINITY
    }

    fn nan() -> Self {
        f32::NAN
    }

    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}
