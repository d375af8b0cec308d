use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the closed-form solvers are written against: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Relative tolerance floor that is still meaningful at this precision.
    fn tol_floor() -> Self {
        Self::epsilon() * lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `max(tol, tol_floor)`: keeps f64 tolerances from dropping below what f32 can resolve.
#[inline]
pub(crate) fn rel_tol<T: Scalar>(tol: f64) -> T {
    lit::<T>(tol).max(T::tol_floor())
}
