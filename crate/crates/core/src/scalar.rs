//! Scalar abstraction for the numeric core.
//!
//! The geometry, fusion, and metric layers are generic over [`Scalar`] so the
//! same code runs in `f32` or `f64`. The systems layers (simulator, prompt
//! interface, evaluation) use the `f64` aliases exported from the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and config values.
    fn from_f64_lossy(value: f64) -> Self;

    /// Lossy conversion to `f64`, for reporting and serialization.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64_lossy(value: f64) -> Self {
        value
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for `S::from_f64_lossy` in generic code.
#[inline]
pub fn cast<S: Scalar>(value: f64) -> S {
    S::from_f64_lossy(value)
}
