//! Window batches: tracker inputs and labels cut from recorded sessions.

use ndarray::{Array3, Array4, Axis};

use crate::scalar::{wrap_angle, Scalar};
use crate::sim::{Session, SAMPLES_PER_SEQUENCE, SAMPLE_RATE};

use super::{Head, Result, TrackerConfig, TrackerError};

/// A batch of `B` sequences, each `S` windows of `W` raw 9-DoF samples,
/// with per-window 2-D labels and the domain tag of every sequence.
#[derive(Debug, Clone)]
pub struct WindowBatch<T> {
    /// `(B, S, W, channels)`; channel order `ax, ay, az, gx, gy, gz, mx, my, mz`
    /// with gravity removed from `az`.
    pub inputs: Array4<T>,
    /// `(B, S, 2)`: Cartesian `(dx, dy)` or Polar `(dd, dphi)` per window.
    pub labels: Array3<T>,
    pub domains: Vec<u8>,
}

impl<T: Scalar> WindowBatch<T> {
    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn windows(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Select sequences by index.
    pub fn select(&self, idx: &[usize]) -> WindowBatch<T> {
        WindowBatch {
            inputs: self.inputs.select(Axis(0), idx),
            labels: self.labels.select(Axis(0), idx),
            domains: idx.iter().map(|&i| self.domains[i]).collect(),
        }
    }

    /// Stack batches with identical window geometry.
    pub fn concat(parts: &[WindowBatch<T>]) -> Result<WindowBatch<T>> {
        if parts.is_empty() {
            return Err(TrackerError::EmptyBatch);
        }
        let inputs: Vec<_> = parts.iter().map(|p| p.inputs.view()).collect();
        let labels: Vec<_> = parts.iter().map(|p| p.labels.view()).collect();
        Ok(WindowBatch {
            inputs: ndarray::concatenate(Axis(0), &inputs)
                .map_err(|e| TrackerError::ShapeMismatch(e.to_string()))?,
            labels: ndarray::concatenate(Axis(0), &labels)
                .map_err(|e| TrackerError::ShapeMismatch(e.to_string()))?,
            domains: parts.iter().flat_map(|p| p.domains.iter().copied()).collect(),
        })
    }
}

/// Cut the given sequences of a session into a [`WindowBatch`].
///
/// Labels come from the 5 Hz pseudo-groundtruth, linearly interpolated to
/// window boundaries and translated to the mounted sensor's world position:
/// Cartesian labels are world-frame displacements of that point, Polar
/// labels are `(chord length, heading change)`.
pub fn sequence_batch<T: Scalar>(
    session: &Session<T>,
    sequences: &[usize],
    cfg: &TrackerConfig,
    gravity: T,
) -> Result<WindowBatch<T>> {
    cfg.validate()?;
    if cfg.windows * cfg.window_len != SAMPLES_PER_SEQUENCE {
        return Err(TrackerError::InvalidConfig(format!(
            "windows {} x window_len {} must cover one {}-sample sequence",
            cfg.windows, cfg.window_len, SAMPLES_PER_SEQUENCE
        )));
    }
    if sequences.is_empty() {
        return Err(TrackerError::EmptyBatch);
    }
    let available = session.num_sequences();
    if let Some(&bad) = sequences.iter().find(|&&q| q >= available) {
        return Err(TrackerError::ShapeMismatch(format!(
            "sequence {bad} out of range, session has {available}"
        )));
    }

    let (b, s, w) = (sequences.len(), cfg.windows, cfg.window_len);
    let c = cfg.input_channels;
    let offset = session.domain.offset::<T>();
    let dt = T::c(1.0 / SAMPLE_RATE);

    let mut inputs = Array4::zeros((b, s, w, c));
    let mut labels = Array3::zeros((b, s, 2));
    for (bi, &q) in sequences.iter().enumerate() {
        let base = q * SAMPLES_PER_SEQUENCE;
        for si in 0..s {
            for wi in 0..w {
                let sample = &session.imu[base + si * w + wi];
                inputs[[bi, si, wi, 0]] = sample.accel[0];
                inputs[[bi, si, wi, 1]] = sample.accel[1];
                inputs[[bi, si, wi, 2]] = sample.accel[2] - gravity;
                inputs[[bi, si, wi, 3]] = sample.gyro[0];
                inputs[[bi, si, wi, 4]] = sample.gyro[1];
                inputs[[bi, si, wi, 5]] = sample.gyro[2];
                if cfg.use_magnetometer {
                    inputs[[bi, si, wi, 6]] = sample.mag[0];
                    inputs[[bi, si, wi, 7]] = sample.mag[1];
                    inputs[[bi, si, wi, 8]] = sample.mag[2];
                }
            }

            let t0 = T::c((base + si * w) as f64) * dt;
            let t1 = T::c((base + (si + 1) * w) as f64) * dt;
            let p0 = session.imu_position_at(t0, &offset);
            let p1 = session.imu_position_at(t1, &offset);
            let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
            match cfg.head {
                Head::Cartesian => {
                    labels[[bi, si, 0]] = dx;
                    labels[[bi, si, 1]] = dy;
                }
                Head::Polar => {
                    labels[[bi, si, 0]] = (dx * dx + dy * dy).sqrt();
                    labels[[bi, si, 1]] =
                        wrap_angle(session.pose_at(t1).phi - session.pose_at(t0).phi);
                }
            }
        }
    }
    Ok(WindowBatch {
        inputs,
        labels,
        domains: vec![session.domain.index() as u8; b],
    })
}
