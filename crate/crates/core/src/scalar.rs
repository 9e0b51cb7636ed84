//! Scalar abstraction for the numeric core.
//!
//! Everything numerical in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Pipelines and the CLI run at `f64`
//! (see [`crate::Real`]); `f32` stays available for memory-bound uses.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + ScalarOperand
    + LinalgScalar
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` constant or configuration value.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to scalar")
    }

    /// Lossless widening for output formatting and serialization.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let pi = T::c(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut x = a % two_pi;
    if x <= -pi {
        x += two_pi;
    } else if x > pi {
        x -= two_pi;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn wrap_lands_in_half_open_interval() {
        for k in -20..=20 {
            let a = 0.37 + 1.1 * k as f64;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "wrap({a}) = {w}");
            assert_abs_diff_eq!((w - a).rem_euclid(2.0 * PI), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wrap_boundary_maps_to_positive_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn wrap_works_at_f32() {
        let w = wrap_angle(10.0f32);
        assert!(w > -std::f32::consts::PI && w <= std::f32::consts::PI);
    }
}
