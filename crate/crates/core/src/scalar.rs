//! Floating-point abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type used by feature vectors, models and probability vectors.
///
/// Implemented for `f32` and `f64`. `Display` and `FromStr` are required so
/// that model and table files written with `{}` parse back bit-exactly.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// `f32` or `f64`, as written in model files.
    const NAME: &'static str;

    /// Lossy conversion from `f64`; used for constants and file values.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Parses a decimal written by `Display`; reports the offending text on failure.
pub(crate) fn parse_scalar<T: Scalar>(s: &str) -> Option<T> {
    s.trim().parse::<T>().ok()
}
