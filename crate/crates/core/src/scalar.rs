//! Scalar abstraction shared by the closed-form geometry and Fisher code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the analytic modules are generic over (`f32` or `f64`).
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only if the target type cannot
    /// represent finite `f64` values at all (never the case for `f32`/`f64`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Converts a count to the scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
