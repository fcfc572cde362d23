use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Scalar type the closed-form parts of the library are generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in the scalar type")
}

#[inline]
pub(crate) fn half<T: Real>() -> T {
    lit(0.5)
}

#[inline]
pub(crate) fn two<T: Real>() -> T {
    lit(2.0)
}
