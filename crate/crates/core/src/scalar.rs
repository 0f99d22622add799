//! Scalar abstraction shared by every exact computation in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the probability and information code is generic over.
///
/// Monte Carlo paths always accumulate in `f64`; everything else (distributions,
/// information functionals, capacity optimizers) runs in `T`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance on the total mass of a distribution.
    fn norm_tol() -> Self;

    /// Smallest value treated as strictly positive inside logarithms.
    fn log_floor() -> Self {
        Self::min_positive_value()
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f64 {
    fn norm_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn norm_tol() -> Self {
        2e-6
    }
}

/// `x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlnx<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

/// Natural log clamped away from `-inf`; used only in gradients.
#[inline]
pub(crate) fn ln_floor<T: Real>(x: T) -> T {
    if x > T::log_floor() {
        x.ln()
    } else {
        T::log_floor().ln()
    }
}
