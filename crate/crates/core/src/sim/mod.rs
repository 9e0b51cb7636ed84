//! Synthetic data for position-indexed IMU domains.
//!
//! A differential-drive robot is driven around a rectangular arena; a 9-DoF
//! IMU rigidly mounted at a programmable body-frame offset observes the
//! motion. Because angular rate is uniform across a rigid body but the
//! centripetal term scales with the offset radius, each mounting position
//! induces its own input distribution — the "domain" under study.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{wrap_angle, Scalar};

mod dataset;
mod imu;
mod trajectory;

pub use dataset::{
    build_dataset, load_dataset, save_dataset, Dataset, DatasetConfig, NoiseConfig, SplitSpec,
};
pub use imu::imu_from_trajectory;
pub use trajectory::{generate_trajectory, TrajectoryConfig};

/// IMU sampling rate, Hz.
pub const SAMPLE_RATE: f64 = 70.0;
/// Pseudo-groundtruth rate, Hz.
pub const GT_RATE: f64 = 5.0;
/// Length of one navigation sequence, seconds.
pub const SEQUENCE_SECONDS: f64 = 20.0;
/// IMU samples per sequence.
pub const SAMPLES_PER_SEQUENCE: usize = 1400;
/// Number of mechanically indexed sensor positions.
pub const NUM_DOMAINS: usize = 8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate arena: {0}")]
    DegenerateArena(String),

    #[error("domain index {0} out of range 0..{NUM_DOMAINS}")]
    InvalidDomain(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed dataset: {0}")]
    MalformedDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Planar pose; heading wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    pub phi: T,
}

impl<T: Scalar> Pose2D<T> {
    pub fn new(x: T, y: T, phi: T) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }
}

/// Rigid-body mounting offset of a sensor, body frame, origin at the center
/// of mass. Radial distance and offset angle are derived from the Cartesian
/// offset.
#[derive(Debug, Clone, Copy)]
pub struct RigidBodyOffset<T> {
    pub x_imu: T,
    pub y_imu: T,
    pub phi_imu: T,
    pub r_imu: T,
}

impl<T: Scalar> RigidBodyOffset<T> {
    pub fn new(x_imu: T, y_imu: T) -> Self {
        Self {
            x_imu,
            y_imu,
            phi_imu: y_imu.atan2(x_imu),
            r_imu: (x_imu * x_imu + y_imu * y_imu).sqrt(),
        }
    }
}

/// One of the eight indexed slider positions, spaced 1 cm apart along the
/// body x-axis from -0.4 cm to 6.6 cm relative to the center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainIndex(u8);

impl DomainIndex {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_DOMAINS {
            Ok(Self(index as u8))
        } else {
            Err(SimError::InvalidDomain(index))
        }
    }

    pub fn all() -> impl Iterator<Item = DomainIndex> {
        (0..NUM_DOMAINS).map(|k| DomainIndex(k as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn offset_cm(self) -> f64 {
        -0.4 + self.0 as f64
    }

    /// Body-frame mounting offset in metres (on the x-axis).
    pub fn offset<T: Scalar>(self) -> RigidBodyOffset<T> {
        RigidBodyOffset::new(T::c(self.offset_cm() / 100.0), T::zero())
    }
}

/// One timestamped 9-DoF reading.
#[derive(Debug, Clone, Copy)]
pub struct ImuSample<T> {
    pub t: T,
    /// Specific force, m/s^2, body frame; z carries gravity.
    pub accel: [T; 3],
    /// Angular rate, rad/s, body frame.
    pub gyro: [T; 3],
    /// Normalized magnetic field, body frame (world x-axis reference).
    pub mag: [T; 3],
}

/// Sensor noise model: white noise sigmas plus per-session constant biases.
/// `seed` keys the noise stream so that a session is a pure function of its
/// inputs.
#[derive(Debug, Clone)]
pub struct NoiseModel<T> {
    pub accel_sigma: T,
    pub gyro_sigma: T,
    pub mag_sigma: T,
    pub accel_bias: [T; 3],
    pub gyro_bias: [T; 3],
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    /// Noise-free, bias-free model.
    pub fn zero(seed: u64) -> Self {
        Self {
            accel_sigma: T::zero(),
            gyro_sigma: T::zero(),
            mag_sigma: T::zero(),
            accel_bias: [T::zero(); 3],
            gyro_bias: [T::zero(); 3],
            seed,
        }
    }
}

/// A domain-indexed recording: IMU stream at 70 Hz plus pseudo-groundtruth
/// poses at 5 Hz covering the same span.
#[derive(Debug, Clone)]
pub struct Session<T> {
    pub domain: DomainIndex,
    pub imu: Vec<ImuSample<T>>,
    pub groundtruth: Vec<(T, Pose2D<T>)>,
    pub seed: u64,
}

impl<T: Scalar> Session<T> {
    pub fn num_sequences(&self) -> usize {
        self.imu.len() / SAMPLES_PER_SEQUENCE
    }

    /// Linear interpolation of the groundtruth pose at time `t` (clamped to
    /// the recorded span). Heading is interpolated along the shortest arc.
    pub fn pose_at(&self, t: T) -> Pose2D<T> {
        let gt = &self.groundtruth;
        assert!(!gt.is_empty(), "session without groundtruth");
        if t <= gt[0].0 {
            return gt[0].1;
        }
        if t >= gt[gt.len() - 1].0 {
            return gt[gt.len() - 1].1;
        }
        let mut lo = 0usize;
        let mut hi = gt.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if gt[mid].0 <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t0, p0) = gt[lo];
        let (t1, p1) = gt[hi];
        let u = (t - t0) / (t1 - t0);
        Pose2D::new(
            p0.x + u * (p1.x - p0.x),
            p0.y + u * (p1.y - p0.y),
            p0.phi + u * wrap_angle(p1.phi - p0.phi),
        )
    }

    /// World position of the mounted IMU at time `t`.
    pub fn imu_position_at(&self, t: T, offset: &RigidBodyOffset<T>) -> (T, T) {
        translate_slam_to_imu(&self.pose_at(t), offset)
    }
}

/// Translate a groundtruth body pose to the world position of a sensor
/// mounted at `offset`:
/// `x + r cos(phi + phi_imu)`, `y + r sin(phi + phi_imu)`.
pub fn translate_slam_to_imu<T: Scalar>(slam: &Pose2D<T>, offset: &RigidBodyOffset<T>) -> (T, T) {
    let angle = slam.phi + offset.phi_imu;
    (
        slam.x + offset.r_imu * angle.cos(),
        slam.y + offset.r_imu * angle.sin(),
    )
}
