use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Scalar type accepted by every numerical routine in the crate.
///
/// Implemented for `f32` and `f64`. Accuracy contracts quoted in the docs
/// refer to `f64`; `f32` runs the same algorithms at single precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + FftNum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(tol, scale * eps)`: an absolute tolerance that stays meaningful
    /// at single precision.
    #[inline]
    fn tol(tol: f64, eps_multiple: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(eps_multiple))
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + FftNum
        + Send
        + Sync
        + 'static
{
}

/// Reduces an angle into `[-pi, pi)`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let pi = T::PI();
    if x >= -pi && x < pi {
        return x;
    }
    let mut y = (x + pi) % two_pi;
    if y < T::zero() {
        y += two_pi;
    }
    let r = y - pi;
    // `%` can return exactly 2*pi after rounding
    if r >= pi {
        r - two_pi
    } else {
        r
    }
}
