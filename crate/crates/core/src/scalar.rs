//! Floating-point abstraction used by all numeric code in this crate.
//!
//! Model math is written against the [`Scalar`] trait so the same code runs
//! in `f32` or `f64`. Production paths (solver, experiments) use the `f64`
//! aliases exported from the crate root; `f32` is exercised by smoke tests.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating scalar the model is generic over.
///
/// This is a trait alias: anything float-like with assignment operators,
/// primitive conversions and serde support qualifies, and a blanket impl
/// covers `f32` and `f64`.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Default
        + Debug
        + Display
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant to the working scalar type.
///
/// Panics if the value is not representable, which cannot happen for the
/// finite literals this crate feeds it.
#[inline]
pub fn real<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("constant not representable as scalar")
}

/// Converts a `usize` count to the working scalar type.
#[inline]
pub fn count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("count not representable as scalar")
}
