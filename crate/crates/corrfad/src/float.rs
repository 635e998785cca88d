//! Scalar abstraction for all numeric kernels.
//!
//! Every image, spectrum, and score in this crate is generic over [`Float`],
//! which is implemented for `f32` and `f64`. Concrete aliases live at the
//! crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable by the transform and correlation kernels.
pub trait Float:
    num_traits::Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + Debug
{
    /// Lossy conversion from `f64` (exact for every value an `f64` pipeline
    /// produces, rounded for `f32`).
    fn of(value: f64) -> Self;

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64;
}

impl Float for f32 {
    #[inline]
    fn of(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    #[inline]
    fn of(value: f64) -> Self {
        value
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
