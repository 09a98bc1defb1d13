//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point type the optics and solver code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in tests assume `f64`.
pub trait Scalar:
    FftNum + Float + FloatConst + Debug + Display + LowerExp + Default + Serialize + DeserializeOwned
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// `usize` index or count as a scalar.
#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::lit(n as f64)
}

/// `isize` offset as a scalar.
#[inline]
pub(crate) fn from_isize<T: Scalar>(n: isize) -> T {
    T::lit(n as f64)
}

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase<T: Scalar>(phi: T) -> T {
    let pi = T::PI();
    let tau = T::two_pi();
    let mut w = phi - tau * ((phi + pi) / tau).floor();
    // w is now in [-π, π) up to rounding
    if w <= -pi {
        w = w + tau;
    }
    if w > pi {
        w = w - tau;
    }
    w
}
