//! Scalar abstraction: the whole library is generic over the floating-point
//! type through this trait, with `f64` as the working default.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating-point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssignOps + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Convert an `f64` literal to `Self`. Panics only for non-representable
    /// values, which cannot happen for the finite literals used internally.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn two() -> Self {
        Self::of(2.0)
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate scalar.
pub type C<T> = num_complex::Complex<T>;

/// i as a complex constant.
#[inline]
pub fn im<T: Real>() -> C<T> {
    C::new(T::zero(), T::one())
}

/// Real constant lifted to the complex plane.
#[inline]
pub fn cr<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}
