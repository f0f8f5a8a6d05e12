//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Serialize
    + Send
    + Sync
    + 'static
{
    /// Digits needed to round-trip a value through decimal text.
    const ROUND_TRIP_DIGITS: usize;

    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest time argument for which `exp(t)` stays finite, with margin.
    fn exp_limit() -> Self {
        let ln_max = Self::max_value().ln();
        ln_max.min(Self::lit(700.0))
    }
}

impl Real for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
}

impl Real for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
}

/// Relative difference `|a - b| / max(1, scale)`.
pub fn rel_diff<T: Real>(a: T, b: T, scale: T) -> T {
    (a - b).abs() / scale.abs().max(T::one())
}
