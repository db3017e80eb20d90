//! Numeric abstraction for bandwidth values.
//!
//! Every bandwidth quantity (Mbit/s) in the model and scheduler is generic over
//! [`Scalar`]. `f64` is the working type for simulation; [`BigRational`] gives
//! exact arithmetic where sums and differences have to compare bit-for-bit,
//! e.g. capacity conservation across thousands of apply/release cycles.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A real-valued bandwidth scalar.
pub trait Scalar:
    Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// False for NaN and infinities. Exact types are always finite.
    fn is_finite_value(&self) -> bool;

    /// Lossless-where-possible conversion from an `f64` measurement.
    fn from_mbps(value: f64) -> Option<Self> {
        Self::from_f64(value)
    }

    /// Lossy view used for reporting.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Equality up to rounding of the representation. Exact for exact types;
    /// floats allow a few ulps relative to the operands' magnitude.
    fn same_quantity(&self, other: &Self) -> bool {
        self == other
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn same_quantity(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-9 * self.abs().max(other.abs()).max(1.0)
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn same_quantity(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-4 * self.abs().max(other.abs()).max(1.0)
    }
}

impl Scalar for Rational64 {
    fn is_finite_value(&self) -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn is_finite_value(&self) -> bool {
        true
    }

    // `FromPrimitive` for big rationals goes through a bounded approximation;
    // every finite binary float is representable exactly, so use that instead.
    fn from_mbps(value: f64) -> Option<Self> {
        BigRational::from_float(value)
    }
}

/// Exact conversion of a whole number, for tests and hand-built inputs.
pub fn exact(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub(crate) fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn min_of<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

/// Sum in iteration order. Callers that compare sums must iterate in the same
/// order for float types to agree bit-for-bit.
pub(crate) fn sum_of<'a, S: Scalar, I: IntoIterator<Item = &'a S>>(values: I) -> S {
    values.into_iter().fold(S::zero(), |acc, v| acc + v.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_rational_from_float_is_exact() {
        let x = 0.1f64;
        let r = BigRational::from_mbps(x).unwrap();
        assert_eq!(r.to_f64().unwrap(), x);
        // 0.1 is not 1/10 in binary.
        assert_ne!(r, BigRational::new(1.into(), 10.into()));
    }

    #[test]
    fn non_finite_detection() {
        assert!(!f64::NAN.is_finite_value());
        assert!(!f64::INFINITY.is_finite_value());
        assert!(1.5f64.is_finite_value());
        assert!(exact(3).is_finite_value());
        assert!(f64::from_mbps(f64::NAN).unwrap().is_nan());
        assert!(BigRational::from_mbps(f64::NAN).is_none());
    }
}
