//! Scalar abstraction for the numeric core.
//!
//! Everything numerical in this crate is generic over [`Float`] so the same
//! code runs in `f32` or `f64`. The reference configuration (and the one the
//! CLI uses) is `f64`; transcendental kernels always evaluate in `f64` via
//! soft-float routines so results are reproducible across platforms.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant into the scalar type.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 representable as scalar")
    }

    /// Convert a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable as scalar")
    }

    /// Widen to `f64` (exact for `f64`, lossless for `f32`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// `exp` through a platform-independent soft-float kernel.
pub fn exp<T: Float>(x: T) -> T {
    T::cast(libm::exp(x.as_f64()))
}

/// Natural logarithm through a platform-independent soft-float kernel.
pub fn ln<T: Float>(x: T) -> T {
    T::cast(libm::log(x.as_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casts_round_trip() {
        assert_eq!(f64::cast(0.25), 0.25);
        assert_eq!(f32::cast(0.25), 0.25f32);
        assert_eq!(f64::from_count(41), 41.0);
        assert_eq!(0.5f32.as_f64(), 0.5);
    }

    #[test]
    fn soft_float_matches_identities() {
        assert!((exp(0.0f64) - 1.0).abs() < 1e-15);
        assert!((ln(std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert!((exp(ln(7.5f64)) - 7.5).abs() < 1e-12);
    }
}
