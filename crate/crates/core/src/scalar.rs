//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that does arithmetic on probabilities, correlations or
//! analog cell values is generic over [`Real`], so the same code runs in
//! `f32` (cheap bulk simulation) and `f64` (analysis and reports).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type usable by the workbench.
pub trait Real: Float + FftNum + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default {
    /// Converts an `f64` constant. Infallible for the IEEE types we implement.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sign of `x` as -1, 0 or +1.
pub fn signum_i8<T: Real>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}
