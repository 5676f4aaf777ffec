//! Scalar abstraction shared by every numeric module.

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Floor of `num / den` that snaps to the nearest integer when the quotient
/// lies within a few ulps of it, so `(0 - (-96)) / 0.6` lands on 160 rather
/// than 159.
#[inline]
pub(crate) fn snapped_floor<T: Real>(num: T, den: T) -> T {
    let q = num / den;
    let r = q.round();
    let tol = T::epsilon() * T::lit(16.0) * q.abs().max(T::one());
    if (q - r).abs() <= tol {
        r
    } else {
        q.floor()
    }
}
