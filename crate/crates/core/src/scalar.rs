//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solvers are written against: `f64` for production runs,
/// `f32` where memory matters more than the last digits.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(v: f64) -> Self;

    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Smallest Picard tolerance that is meaningful at this precision.
    fn default_picard_tol() -> Self;

    /// Standard normal cumulative distribution function.
    fn norm_cdf(self) -> Self {
        Self::lit(0.5) * (-self / Self::SQRT_2()).erfc()
    }

    /// Lossy conversion used for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(x, 0)`.
    fn pos(self) -> Self {
        self.max(Self::zero())
    }

    /// `max(-x, 0)`.
    fn neg_part(self) -> Self {
        (-self).max(Self::zero())
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    fn default_picard_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    fn default_picard_tol() -> Self {
        // 64 ulp at unit magnitude
        64.0 * f32::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_points() {
        assert!((0.0f64.norm_cdf() - 0.5).abs() < 1e-16);
        // Phi(1.959963984540054) = 0.975
        assert!((1.959963984540054f64.norm_cdf() - 0.975).abs() < 1e-14);
        assert!(((-1.0f64).norm_cdf() - 0.15865525393145707).abs() < 1e-15);
        assert!((1.0f32.norm_cdf() - 0.841_344_7).abs() < 1e-6);
    }

    #[test]
    fn positive_and_negative_parts() {
        assert_eq!(2.5f64.pos(), 2.5);
        assert_eq!((-2.5f64).pos(), 0.0);
        assert_eq!((-2.5f64).neg_part(), 2.5);
        assert_eq!(2.5f64.neg_part(), 0.0);
        let x = -0.75f64;
        assert_eq!(x.pos() - x.neg_part(), x);
    }
}
