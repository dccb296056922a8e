//! Numeric abstraction shared by every solver.
//!
//! The exact pipeline (capacity, corner points, the peak-age LP) runs over
//! [`Rational`](crate::Rational); anything that needs square roots runs over
//! a [`FloatScalar`]. Both satisfy [`Scalar`], so the model formulas, the
//! constraint system and the LP are written once.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Num, Signed, ToPrimitive, Zero};

/// An ordered field usable by the model formulas and the simplex.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// Comparison slack. Zero for exact types.
    fn tolerance() -> Self;

    /// `num / den` in this type.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Conversion from an exact rational (rounded for floats).
    fn from_rational(value: &BigRational) -> Self;

    fn to_f64(&self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    /// `true` when `self` is within tolerance of zero.
    fn near_zero(&self) -> bool {
        self.abs() <= Self::tolerance()
    }

    fn is_exact() -> bool {
        Self::tolerance().is_zero()
    }
}

/// Floating-point scalars (`f32`, `f64`).
pub trait FloatScalar: Scalar + Float {
    fn c(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).expect("finite constant")
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-10
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_rational(value: &BigRational) -> Self {
        ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn from_rational(value: &BigRational) -> Self {
        value.to_f32().unwrap_or(f32::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl FloatScalar for f64 {}
impl FloatScalar for f32 {}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_rational(value: &BigRational) -> Self {
        value.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact conversion of a finite float into a rational.
pub fn rational_from_f64(value: f64) -> Option<BigRational> {
    BigRational::from_float(value)
}

/// Shorthand for building small rational constants.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_tolerance_is_exact() {
        assert!(BigRational::is_exact());
        assert!(!f64::is_exact());
        assert!(!ratio(1, 3).near_zero());
        assert!((ratio(1, 3) - ratio(2, 6)).near_zero());
    }

    #[test]
    fn conversions_round_trip() {
        let q = <BigRational as Scalar>::from_ratio(4, 7);
        assert_eq!(q, ratio(4, 7));
        assert!((<f64 as Scalar>::from_rational(&q) - 4.0 / 7.0).abs() < 1e-16);
        assert_eq!(rational_from_f64(0.5), Some(ratio(1, 2)));
        assert_eq!(<f64 as FloatScalar>::c(2.5), 2.5);
    }
}
