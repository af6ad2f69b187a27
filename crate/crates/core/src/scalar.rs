//! Floating-point abstraction shared by embeddings, scorers and trainers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for embedding storage and score arithmetic.
///
/// Implemented for `f32` and `f64`. On-disk embeddings are always 32-bit,
/// so `f32` is lossless for file round-trips while `f64` gives headroom for
/// oracle comparisons.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f32_lossy(v: f32) -> Self;
    fn to_f32_lossy(self) -> f32;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }
}

impl Scalar for f32 {
    fn from_f32_lossy(v: f32) -> Self {
        v
    }
    fn to_f32_lossy(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn from_f32_lossy(v: f32) -> Self {
        v as f64
    }
    fn to_f32_lossy(self) -> f32 {
        self as f32
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn l2_norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
