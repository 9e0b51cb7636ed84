//! Differential-drive trajectory generation.
//!
//! A waypoint-following controller with bounded speed, yaw rate, and
//! accelerations, interleaved with occasional in-place spins. Spins matter:
//! they maximize the centripetal signal that separates the sensor-offset
//! domains.

use rand::Rng;

use crate::rng;
use crate::scalar::{wrap_angle, Scalar};

use super::{Pose2D, Result, SimError, SAMPLE_RATE};

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    /// Arena extent, metres.
    pub arena_w: f64,
    pub arena_h: f64,
    /// Keep-out distance from the walls for waypoints.
    pub margin: f64,
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    pub max_accel: f64,
    pub max_yaw_accel: f64,
    /// Probability of an in-place spin after reaching a waypoint.
    pub spin_probability: f64,
    pub spin_seconds: (f64, f64),
    pub spin_rate: (f64, f64),
    /// Stop after visiting this many waypoints; `None` means keep driving.
    /// `Some(0)` leaves the robot stationary.
    pub waypoint_limit: Option<usize>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            arena_w: 8.0,
            arena_h: 6.0,
            margin: 0.6,
            max_speed: 0.4,
            max_yaw_rate: 1.5,
            max_accel: 0.6,
            max_yaw_accel: 3.0,
            spin_probability: 0.4,
            spin_seconds: (1.0, 2.5),
            spin_rate: (0.8, 1.4),
            waypoint_limit: None,
        }
    }
}

impl TrajectoryConfig {
    fn validate(&self) -> Result<()> {
        if !(self.arena_w > 2.0 * self.margin && self.arena_h > 2.0 * self.margin) {
            return Err(SimError::DegenerateArena(format!(
                "{} x {} m with margin {} m",
                self.arena_w, self.arena_h, self.margin
            )));
        }
        if self.max_speed <= 0.0 || self.max_yaw_rate <= 0.0 {
            return Err(SimError::InvalidConfig("speed limits must be positive".into()));
        }
        Ok(())
    }
}

enum Phase {
    Drive { wp: (f64, f64), visited: usize },
    Spin { steps_left: usize, rate: f64, visited: usize },
    Idle,
}

/// Generate a dense pose stream at 70 Hz: `round(duration * 70)` samples at
/// `t_k = k / 70`. Deterministic in `seed`.
pub fn generate_trajectory<T: Scalar>(
    duration_s: f64,
    cfg: &TrajectoryConfig,
    seed: u64,
) -> Result<Vec<(T, Pose2D<T>)>> {
    if duration_s <= 0.0 {
        return Err(SimError::InvalidConfig(format!("duration {duration_s} s")));
    }
    cfg.validate()?;

    let n = (duration_s * SAMPLE_RATE).round() as usize;
    let dt = 1.0 / SAMPLE_RATE;
    let mut rng = rng::stream(seed, "trajectory", 0);

    let sample_wp = |rng: &mut rand_chacha::ChaCha8Rng| -> (f64, f64) {
        (
            rng.gen_range(cfg.margin..cfg.arena_w - cfg.margin),
            rng.gen_range(cfg.margin..cfg.arena_h - cfg.margin),
        )
    };

    // Start somewhere inside the margins with a random heading.
    let mut x = rng.gen_range(cfg.margin..cfg.arena_w - cfg.margin);
    let mut y = rng.gen_range(cfg.margin..cfg.arena_h - cfg.margin);
    let mut phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut v = 0.0f64;
    let mut omega = 0.0f64;

    let mut phase = match cfg.waypoint_limit {
        Some(0) => Phase::Idle,
        _ => Phase::Drive { wp: sample_wp(&mut rng), visited: 0 },
    };

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push((T::c(k as f64 * dt), Pose2D::new(T::c(x), T::c(y), T::c(phi))));

        let (v_cmd, w_cmd) = match phase {
            Phase::Idle => (0.0, 0.0),
            Phase::Spin { ref mut steps_left, rate, visited } => {
                if *steps_left == 0 {
                    phase = match cfg.waypoint_limit {
                        Some(limit) if visited >= limit => Phase::Idle,
                        _ => Phase::Drive { wp: sample_wp(&mut rng), visited },
                    };
                    (0.0, 0.0)
                } else {
                    *steps_left -= 1;
                    (0.0, rate)
                }
            }
            Phase::Drive { ref mut wp, ref mut visited } => {
                let (dx, dy) = (wp.0 - x, wp.1 - y);
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < 0.15 {
                    *visited += 1;
                    let visited = *visited;
                    let done = matches!(cfg.waypoint_limit, Some(limit) if visited >= limit);
                    if done {
                        phase = Phase::Idle;
                    } else if rng.gen_range(0.0..1.0) < cfg.spin_probability {
                        let secs = rng.gen_range(cfg.spin_seconds.0..cfg.spin_seconds.1);
                        let rate = rng.gen_range(cfg.spin_rate.0..cfg.spin_rate.1)
                            * if rng.gen_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
                        phase = Phase::Spin {
                            steps_left: (secs * SAMPLE_RATE) as usize,
                            rate,
                            visited,
                        };
                    } else {
                        *wp = sample_wp(&mut rng);
                    }
                    (0.0, 0.0)
                } else {
                    // Steer back toward the center when hugging a wall.
                    let guard = cfg.margin * 0.5;
                    let outward = x < guard
                        || y < guard
                        || x > cfg.arena_w - guard
                        || y > cfg.arena_h - guard;
                    let (tx, ty) = if outward {
                        (cfg.arena_w * 0.5 - x, cfg.arena_h * 0.5 - y)
                    } else {
                        (dx, dy)
                    };
                    let err = wrap_angle(ty.atan2(tx) - phi);
                    let w_cmd = (2.5 * err).clamp(-cfg.max_yaw_rate, cfg.max_yaw_rate);
                    let align = (1.0 - err.abs() / 1.2).clamp(0.0, 1.0);
                    let approach = (dist / 0.5).clamp(0.25, 1.0);
                    (cfg.max_speed * align * approach, w_cmd)
                }
            }
        };

        v += (v_cmd - v).clamp(-cfg.max_accel * dt, cfg.max_accel * dt);
        omega += (w_cmd - omega).clamp(-cfg.max_yaw_accel * dt, cfg.max_yaw_accel * dt);
        phi = wrap_angle(phi + omega * dt);
        x += v * phi.cos() * dt;
        y += v * phi.sin() * dt;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = TrajectoryConfig::default();
        let a: Vec<(f64, Pose2D<f64>)> = generate_trajectory(30.0, &cfg, 42).unwrap();
        let b: Vec<(f64, Pose2D<f64>)> = generate_trajectory(30.0, &cfg, 42).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.0.to_bits(), q.0.to_bits());
            assert_eq!(p.1.x.to_bits(), q.1.x.to_bits());
            assert_eq!(p.1.y.to_bits(), q.1.y.to_bits());
            assert_eq!(p.1.phi.to_bits(), q.1.phi.to_bits());
        }
        let c: Vec<(f64, Pose2D<f64>)> = generate_trajectory(30.0, &cfg, 43).unwrap();
        assert!(a.iter().zip(&c).any(|(p, q)| p.1.x != q.1.x));
    }

    #[test]
    fn twenty_seconds_is_1400_samples() {
        let path: Vec<(f64, Pose2D<f64>)> =
            generate_trajectory(20.0, &TrajectoryConfig::default(), 1).unwrap();
        assert_eq!(path.len(), 1400);
        assert_eq!(path[0].0, 0.0);
        assert!((path[1].0 - 1.0 / 70.0).abs() < 1e-15);
    }

    #[test]
    fn zero_waypoints_means_stationary() {
        let cfg = TrajectoryConfig {
            waypoint_limit: Some(0),
            ..TrajectoryConfig::default()
        };
        let path: Vec<(f64, Pose2D<f64>)> = generate_trajectory(5.0, &cfg, 9).unwrap();
        let p0 = path[0].1;
        assert!(path.iter().all(|(_, p)| *p == p0));
    }

    #[test]
    fn stays_inside_arena_with_bounded_rates() {
        let cfg = TrajectoryConfig::default();
        for seed in 0..4 {
            let path: Vec<(f64, Pose2D<f64>)> = generate_trajectory(120.0, &cfg, seed).unwrap();
            let dt = 1.0 / SAMPLE_RATE;
            for w in path.windows(2) {
                let (p, q) = (w[0].1, w[1].1);
                assert!(q.x >= 0.0 && q.x <= cfg.arena_w, "x = {}", q.x);
                assert!(q.y >= 0.0 && q.y <= cfg.arena_h, "y = {}", q.y);
                let speed = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt() / dt;
                assert!(speed <= cfg.max_speed + 1e-9);
                let yaw = wrap_angle(q.phi - p.phi).abs() / dt;
                assert!(yaw <= cfg.max_yaw_rate + 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_arena_is_rejected() {
        let cfg = TrajectoryConfig {
            arena_w: 0.5,
            ..TrajectoryConfig::default()
        };
        assert!(matches!(
            generate_trajectory::<f64>(5.0, &cfg, 0),
            Err(SimError::DegenerateArena(_))
        ));
    }
}
