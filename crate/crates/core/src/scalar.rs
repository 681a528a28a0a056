//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the geometry, quantization and correlation code.
///
/// Implemented for `f32` and `f64`. Files and configuration are always read as
/// `f64` and converted with [`Scalar::lit`].
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for unit-norm checks on descriptors.
    fn unit_tolerance() -> Self;
}

impl Scalar for f32 {
    fn unit_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn unit_tolerance() -> Self {
        1e-6
    }
}

#[inline]
pub(crate) fn deg_to_rad<T: Scalar>(deg: T) -> T {
    deg * T::PI() / T::lit(180.0)
}

#[inline]
pub(crate) fn rad_to_deg<T: Scalar>(rad: T) -> T {
    rad * T::lit(180.0) / T::PI()
}
