//! Numeric traits the toolkit is generic over.
//!
//! [`Field`] is the minimum needed to evaluate polynomial bases exactly
//! (it is implemented for `f32`, `f64` and [`BigRational`]); [`Scalar`] adds
//! the floating-point operations used by everything else.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// A field we can evaluate polynomials over.
pub trait Field: Clone + Num + Neg<Output = Self> + PartialOrd + Debug {
    fn from_int(v: i64) -> Self;

    /// `num / den` as an exact element of the field (rounded for floats).
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }
}

impl Field for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }
}

impl Field for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
}

impl Field for BigRational {
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// Real floating-point scalar (`f32` or `f64`).
pub trait Scalar:
    Field
    + Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
