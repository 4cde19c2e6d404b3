//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: implemented for `f32` and `f64`.
///
/// Everything numeric in the crate is written against this trait. Tolerances
/// and configuration values live as `f64` and are converted with [`Real::lit`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(x: f64) -> Self;

    /// Converts a count or index into this scalar type.
    fn from_count(n: usize) -> Self;

    /// Lossy conversion to `f64`, for reporting.
    fn as_f64(self) -> f64;

    /// Smallest relative singular-value cutoff that is meaningful at this precision.
    fn rank_rtol() -> Self {
        let eps = Self::default_epsilon();
        let floor = Self::lit(1e-12);
        let scaled = eps * Self::lit(100.0);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
}
