//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the estimators are generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + FromStr
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Default
        + Debug
        + Display
        + FromStr
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Sum in slice order. Every reduction in the engine goes through here so results
/// never depend on scheduling.
#[inline]
pub fn ordered_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    ordered_sum(values.iter().copied()) / T::of_usize(values.len())
}
