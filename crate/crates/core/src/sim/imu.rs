//! Body-frame IMU synthesis for planar rigid-body motion.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng;
use crate::scalar::{wrap_angle, Scalar};

use super::{ImuSample, NoiseModel, Pose2D, RigidBodyOffset};

/// Simulate a 9-DoF sensor mounted at `offset` along a dense pose stream.
///
/// In-plane specific force of the sensor point:
/// `R(phi)^T a_center + alpha (z x r) - omega^2 r`, with angular rate
/// `omega = dphi/dt` and angular acceleration `alpha` taken by central
/// differences on the pose stream (clamped at the two end samples). The z
/// channel carries gravity, the gyro carries `omega` on z only, and the
/// magnetometer observes the world x-axis in the body frame.
///
/// The noise draw order is fixed per sample and independent of `offset`, so
/// streams generated for different mounting positions from the same
/// trajectory and noise seed share bitwise-identical gyro (and mag) noise.
pub fn imu_from_trajectory<T: Scalar>(
    path: &[(T, Pose2D<T>)],
    offset: &RigidBodyOffset<T>,
    noise: &NoiseModel<T>,
    gravity: T,
) -> Vec<ImuSample<T>> {
    let n = path.len();
    if n == 0 {
        return Vec::new();
    }

    // Unwrapped heading for differentiation.
    let mut phi_u = Vec::with_capacity(n);
    phi_u.push(path[0].1.phi);
    for k in 1..n {
        let prev = phi_u[k - 1];
        phi_u.push(prev + wrap_angle(path[k].1.phi - path[k - 1].1.phi));
    }

    let dt = if n >= 2 {
        path[1].0 - path[0].0
    } else {
        T::c(1.0 / super::SAMPLE_RATE)
    };
    let dt2 = dt * dt;
    let two = T::c(2.0);

    // Central second/first differences, clamped to interior stencils at the ends.
    let mid = |k: usize| k.clamp(1, n.saturating_sub(2));
    let accel_world = |k: usize| -> (T, T) {
        if n < 3 {
            return (T::zero(), T::zero());
        }
        let k = mid(k);
        let (pm, p0, pp) = (path[k - 1].1, path[k].1, path[k + 1].1);
        (
            (pp.x - two * p0.x + pm.x) / dt2,
            (pp.y - two * p0.y + pm.y) / dt2,
        )
    };
    let omega_at = |k: usize| -> T {
        if n < 3 {
            return T::zero();
        }
        let k = mid(k);
        (phi_u[k + 1] - phi_u[k - 1]) / (two * dt)
    };
    let alpha_at = |k: usize| -> T {
        if n < 3 {
            return T::zero();
        }
        let k = mid(k);
        (phi_u[k + 1] - two * phi_u[k] + phi_u[k - 1]) / dt2
    };

    let mut rng = rng::stream(noise.seed, "imu-noise", 0);
    let mut draw = |sigma: T| -> T {
        let s = sigma.to_f64_c();
        if s > 0.0 {
            let normal = Normal::new(0.0, s).expect("finite sigma");
            T::c(normal.sample(&mut rng))
        } else {
            // Keep the stream position independent of which sigmas are zero.
            let _ = rng.gen::<u64>();
            T::zero()
        }
    };

    let (rx, ry) = (offset.x_imu, offset.y_imu);
    let mut out = Vec::with_capacity(n);
    for (k, (t, pose)) in path.iter().enumerate() {
        let (ax_w, ay_w) = accel_world(k);
        let w = omega_at(k);
        let a = alpha_at(k);
        let (s, c) = pose.phi.sin_cos();

        // R(phi)^T a_world
        let ax_c = c * ax_w + s * ay_w;
        let ay_c = -s * ax_w + c * ay_w;
        // alpha (z x r) - omega^2 r
        let ax_b = ax_c - a * ry - w * w * rx;
        let ay_b = ay_c + a * rx - w * w * ry;

        let accel = [
            ax_b + noise.accel_bias[0] + draw(noise.accel_sigma),
            ay_b + noise.accel_bias[1] + draw(noise.accel_sigma),
            gravity + noise.accel_bias[2] + draw(noise.accel_sigma),
        ];
        let gyro = [
            noise.gyro_bias[0] + draw(noise.gyro_sigma),
            noise.gyro_bias[1] + draw(noise.gyro_sigma),
            w + noise.gyro_bias[2] + draw(noise.gyro_sigma),
        ];
        let mag = [
            c + draw(noise.mag_sigma),
            -s + draw(noise.mag_sigma),
            draw(noise.mag_sigma),
        ];
        out.push(ImuSample { t: *t, accel, gyro, mag });
    }
    out
}
