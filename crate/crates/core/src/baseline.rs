//! Conventional-fusion dead reckoning.
//!
//! A complementary filter blends integrated gyro rate with the absolute
//! magnetometer heading; displacement then comes from double integration of
//! the heading-rotated in-plane acceleration. This is the classic drifting
//! baseline the learned tracker is measured against.

use crate::scalar::{wrap_angle, Scalar};
use crate::sim::{ImuSample, Pose2D, SAMPLE_RATE};

/// Dead-reckoning filter state.
#[derive(Debug, Clone, Copy)]
pub struct FusionState<T> {
    pub heading: T,
    pub velocity: [T; 2],
    pub position: [T; 2],
    /// Complementary blend toward the magnetometer heading, in `[0, 1]`.
    pub complementary_gain: T,
}

/// Absolute heading implied by a magnetometer reading of the world x-axis.
#[inline]
fn mag_heading<T: Scalar>(s: &ImuSample<T>) -> T {
    // Body-frame field R(phi)^T [1, 0] = (cos phi, -sin phi).
    -s.mag[1].atan2(s.mag[0])
}

/// Complementary-filter heading series, one value per sample.
///
/// `theta_{k+1} = wrap(theta_pred + gain * wrap(mag_heading - theta_pred))`
/// with `theta_pred = theta_k + gyro_z * dt`; the first heading comes from
/// the magnetometer. `gain = 0` degenerates to pure gyro integration,
/// `gain = 1` to the instantaneous magnetometer heading.
pub fn estimate_heading<T: Scalar>(imu: &[ImuSample<T>], gain: T) -> Vec<T> {
    let mut out = Vec::with_capacity(imu.len());
    if imu.is_empty() {
        return out;
    }
    let dt = if imu.len() >= 2 {
        imu[1].t - imu[0].t
    } else {
        T::c(1.0 / SAMPLE_RATE)
    };
    let mut theta = mag_heading(&imu[0]);
    out.push(theta);
    for k in 1..imu.len() {
        let pred = theta + imu[k - 1].gyro[2] * dt;
        theta = wrap_angle(pred + gain * wrap_angle(mag_heading(&imu[k]) - pred));
        out.push(theta);
    }
    out
}

/// Double integration of heading-rotated in-plane acceleration
/// (trapezoidal for both velocity and position). The in-plane channels are
/// gravity-free in the planar sensor model, so no gravity compensation is
/// applied here.
pub fn double_integrate<T: Scalar>(
    imu: &[ImuSample<T>],
    headings: &[T],
    start: (T, T),
) -> Vec<Pose2D<T>> {
    assert_eq!(imu.len(), headings.len(), "headings must align with samples");
    let mut out = Vec::with_capacity(imu.len());
    if imu.is_empty() {
        return out;
    }
    let dt = if imu.len() >= 2 {
        imu[1].t - imu[0].t
    } else {
        T::c(1.0 / SAMPLE_RATE)
    };
    let half = T::c(0.5);

    let world = |k: usize| -> (T, T) {
        let (s, c) = headings[k].sin_cos();
        (
            c * imu[k].accel[0] - s * imu[k].accel[1],
            s * imu[k].accel[0] + c * imu[k].accel[1],
        )
    };

    let (mut x, mut y) = start;
    let (mut vx, mut vy) = (T::zero(), T::zero());
    out.push(Pose2D::new(x, y, headings[0]));
    let (mut ax_prev, mut ay_prev) = world(0);
    for k in 1..imu.len() {
        let (ax, ay) = world(k);
        let (vx_new, vy_new) = (
            vx + half * dt * (ax_prev + ax),
            vy + half * dt * (ay_prev + ay),
        );
        x += half * dt * (vx + vx_new);
        y += half * dt * (vy + vy_new);
        vx = vx_new;
        vy = vy_new;
        ax_prev = ax;
        ay_prev = ay;
        out.push(Pose2D::new(x, y, headings[k]));
    }
    out
}

/// Full dead-reckoning pipeline from a raw IMU stream.
pub fn dead_reckon<T: Scalar>(
    imu: &[ImuSample<T>],
    gain: T,
    start: (T, T),
) -> Vec<Pose2D<T>> {
    let headings = estimate_heading(imu, gain);
    double_integrate(imu, &headings, start)
}
