//! Floating point abstraction shared by every engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used for attributes, weights and angles: `f32` or `f64`.
///
/// Random draws are always produced in `f64` and converted, so a seeded run
/// visits the same sample sequence regardless of the scalar chosen.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Relative tolerance for "on the hyperplane" and angle equality tests.
    fn geom_eps() -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn geom_eps() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    // 1e-9 sits below f32 resolution; use a few ulps at unit scale instead.
    #[inline]
    fn geom_eps() -> Self {
        1e-5
    }
}

/// Dot product of two equally sized slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Angle between two nonzero vectors, clamped against rounding.
pub fn angle_between<T: Scalar>(a: &[T], b: &[T]) -> T {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.max(-T::one()).min(T::one()).acos()
}
