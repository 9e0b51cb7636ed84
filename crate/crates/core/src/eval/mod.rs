//! Metrics and cross-domain analyses: error percentiles, per-sequence
//! endpoint errors, fragility and adaptation error matrices, and the raw /
//! latent distribution-shift matrices.

use ndarray::Array2;
use thiserror::Error;

use crate::scalar::{wrap_angle, Scalar};
use crate::sim::{Dataset, DomainIndex, Pose2D};
use crate::tracker::{
    forward, integrate_estimates, sequence_batch, Trajectory, TrackerError, TrackerParams,
};

mod matrices;

pub use matrices::{
    fragility_matrix, latent_shift_matrix, raw_shift_matrix, CdfTable, ShiftConfig,
};

use crate::sim::SEQUENCE_SECONDS;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("percentile {0} outside (0, 100]")]
    BadPercentile(f64),

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(&'static str),

    #[error("expected {0} checkpoints, got {1}")]
    MissingCheckpoints(usize, usize),

    #[error(transparent)]
    Tracker(#[from] TrackerError),

    #[error(transparent)]
    Ot(#[from] crate::ot::OtError),

    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Euclidean distance between the final positions of two aligned
/// trajectories over a sequence.
pub fn distance_error<T: Scalar>(pred: &[Pose2D<T>], gt: &[Pose2D<T>]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch(pred.len(), gt.len()));
    }
    let (p, g) = match (pred.last(), gt.last()) {
        (Some(p), Some(g)) => (p, g),
        _ => return Err(EvalError::EmptyInput),
    };
    Ok(((p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y)).sqrt())
}

/// Absolute wrapped heading difference at the sequence end. Only defined for
/// trajectories that carry a heading (Polar head, fusion).
pub fn heading_error<T: Scalar>(pred: &Trajectory<T>, gt: &[Pose2D<T>]) -> Result<T> {
    if !pred.has_heading {
        return Err(EvalError::UnsupportedMetric(
            "heading error needs a heading-producing trajectory",
        ));
    }
    if pred.poses.len() != gt.len() {
        return Err(EvalError::LengthMismatch(pred.poses.len(), gt.len()));
    }
    let g = gt.last().ok_or(EvalError::EmptyInput)?;
    Ok(wrap_angle(pred.end().phi - g.phi).abs())
}

/// Root-mean-square position error over all aligned poses (the optional
/// whole-trajectory alternative to the endpoint metric).
pub fn ate_rmse<T: Scalar>(pred: &[Pose2D<T>], gt: &[Pose2D<T>]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let sum = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p.x - g.x) * (p.x - g.x) + (p.y - g.y) * (p.y - g.y))
        .sum::<T>();
    Ok((sum / T::c(pred.len() as f64)).sqrt())
}

/// Nearest-rank percentile: the value at 1-based index `ceil(p/100 * N)` of
/// the sorted list. No interpolation.
pub fn percentile<T: Scalar>(errors: &[T], p: f64) -> Result<T> {
    if errors.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(EvalError::BadPercentile(p));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::EmptyInput);
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(T::zero());
    }
    Ok(T::c(cov / (va.sqrt() * vb.sqrt())))
}

fn average_ranks<T: Scalar>(v: &[T]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("finite values"));
    let mut ranks = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            ranks[i] = avg;
        }
        k = end + 1;
    }
    ranks
}

/// Per-sequence evaluation record.
#[derive(Debug, Clone)]
pub struct SeqError<T> {
    pub domain: usize,
    pub sequence: usize,
    pub distance: T,
    /// Absent for trajectories without a heading (Cartesian head).
    pub heading: Option<T>,
}

/// Groundtruth poses of the mounted sensor at the window boundaries of one
/// sequence (position of the sensor point, heading of the body).
pub fn groundtruth_boundary_poses<T: Scalar>(
    dataset: &Dataset<T>,
    domain: DomainIndex,
    sequence: usize,
    windows: usize,
) -> Vec<Pose2D<T>> {
    let session = dataset.session(domain);
    let offset = domain.offset::<T>();
    let step = T::c(SEQUENCE_SECONDS / windows as f64);
    let t0 = T::c(sequence as f64 * SEQUENCE_SECONDS);
    (0..=windows)
        .map(|s| {
            let t = t0 + step * T::c(s as f64);
            let (x, y) = session.imu_position_at(t, &offset);
            Pose2D::new(x, y, session.pose_at(t).phi)
        })
        .collect()
}

/// Run a tracker over the given sequences of one domain and report the
/// per-sequence endpoint errors (and heading errors for the Polar head).
pub fn sequence_errors<T: Scalar>(
    params: &TrackerParams<T>,
    dataset: &Dataset<T>,
    domain: DomainIndex,
    sequences: &[usize],
) -> Result<Vec<SeqError<T>>> {
    if sequences.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let session = dataset.session(domain);
    let batch = sequence_batch(session, sequences, &params.cfg, dataset.gravity)?;
    let pass = forward(params, &batch)?;
    let mut out = Vec::with_capacity(sequences.len());
    for (bi, &q) in sequences.iter().enumerate() {
        let gt = groundtruth_boundary_poses(dataset, domain, q, params.cfg.windows);
        let pred = integrate_estimates(
            pass.estimates().index_axis(ndarray::Axis(0), bi),
            params.cfg.head,
            gt[0],
        );
        let distance = distance_error(&pred.poses, &gt)?;
        let heading = if pred.has_heading {
            Some(heading_error(&pred, &gt)?)
        } else {
            None
        };
        out.push(SeqError {
            domain: domain.index(),
            sequence: q,
            distance,
            heading,
        });
    }
    Ok(out)
}

/// 90th-percentile endpoint error of a tracker on a domain's test split.
pub fn p90_distance<T: Scalar>(
    params: &TrackerParams<T>,
    dataset: &Dataset<T>,
    domain: DomainIndex,
) -> Result<T> {
    let errs = sequence_errors(params, dataset, domain, &dataset.split(domain).test)?;
    let distances: Vec<T> = errs.iter().map(|e| e.distance).collect();
    percentile(&distances, 90.0)
}

/// 8x8 grid of 90th-percentile errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMatrixKind {
    /// Row = number of consecutive source domains (m = 1..8).
    AdaptationSweep,
    /// Row = training domain of a per-domain model.
    Fragility,
}

#[derive(Debug, Clone)]
pub struct ErrorMatrix<T> {
    pub values: Array2<T>,
    pub kind: ErrorMatrixKind,
    pub metric: String,
}

/// 8x8 symmetric distribution-shift grid with a zero diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    RawAccelW1,
    LatentDivergence,
}

#[derive(Debug, Clone)]
pub struct ShiftMatrix<T> {
    pub values: Array2<T>,
    pub kind: ShiftKind,
}

impl<T: Scalar> ShiftMatrix<T> {
    /// Largest asymmetry and diagonal magnitude, for invariant checks.
    pub fn max_violation(&self) -> T {
        let n = self.values.nrows();
        let mut worst = T::zero();
        for i in 0..n {
            worst = worst.max(self.values[[i, i]].abs());
            for j in 0..i {
                worst = worst.max((self.values[[i, j]] - self.values[[j, i]]).abs());
            }
        }
        worst
    }

    /// Upper-triangle entries (i < j), row-major order.
    pub fn upper_triangle(&self) -> Vec<T> {
        let n = self.values.nrows();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.values[[i, j]]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pose(x: f64, y: f64) -> Pose2D<f64> {
        Pose2D::new(x, y, 0.0)
    }

    #[test]
    fn distance_error_examples() {
        let gt = vec![pose(0.0, 0.0), pose(1.0, 1.0)];
        assert_eq!(distance_error(&gt, &gt).unwrap(), 0.0);
        let off = vec![pose(0.0, 0.0), pose(4.0, 5.0)];
        assert_abs_diff_eq!(distance_error(&off, &gt).unwrap(), 5.0);
        assert!(matches!(
            distance_error(&off[..1], &gt),
            Err(EvalError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn distance_error_matches_direct_recomputation_on_random_walks() {
        let mut r = crate::rng::stream(5, "rand-walk", 0);
        use rand::Rng;
        let mut pred = vec![pose(0.0, 0.0)];
        let mut gt = vec![pose(0.0, 0.0)];
        for k in 1..40 {
            let last = pred[k - 1];
            pred.push(pose(last.x + r.gen_range(-0.1..0.1), last.y + r.gen_range(-0.1..0.1)));
            gt.push(pose(0.05 * k as f64, 0.0));
        }
        let expect = {
            let (p, g) = (pred.last().unwrap(), gt.last().unwrap());
            ((p.x - g.x).powi(2) + (p.y - g.y).powi(2)).sqrt()
        };
        assert_abs_diff_eq!(distance_error(&pred, &gt).unwrap(), expect);
    }

    proptest! {
        // Rigid translation of both trajectories leaves the metric unchanged.
        #[test]
        fn distance_error_translation_invariant(
            dx in -50.0f64..50.0, dy in -50.0f64..50.0,
            ex in -3.0f64..3.0, ey in -3.0f64..3.0,
        ) {
            let pred = vec![pose(0.0, 0.0), pose(1.0 + ex, ey)];
            let gt = vec![pose(0.0, 0.0), pose(1.0, 0.0)];
            let shift = |v: &[Pose2D<f64>]| -> Vec<Pose2D<f64>> {
                v.iter().map(|p| pose(p.x + dx, p.y + dy)).collect()
            };
            let a = distance_error(&pred, &gt).unwrap();
            let b = distance_error(&shift(&pred), &shift(&gt)).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        // Nearest-rank percentile is monotone in p and permutation-invariant.
        #[test]
        fn percentile_monotone_and_permutation_invariant(
            mut v in proptest::collection::vec(0.0f64..100.0, 1..40),
            p1 in 1.0f64..100.0,
            p2 in 1.0f64..100.0,
        ) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = percentile(&v, lo).unwrap();
            let b = percentile(&v, hi).unwrap();
            prop_assert!(a <= b);
            let orig = percentile(&v, hi).unwrap();
            v.reverse();
            prop_assert_eq!(percentile(&v, hi).unwrap(), orig);
        }
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[0.0; 7], 90.0).unwrap(), 0.0);
        assert_eq!(percentile(&[3.5], 50.0).unwrap(), 3.5);
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 90.0).unwrap(), 9.0);
        assert!(matches!(percentile(&v, 0.0), Err(EvalError::BadPercentile(_))));
        assert!(matches!(percentile::<f64>(&[], 50.0), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn heading_error_wraps() {
        let gt = vec![Pose2D::new(0.0, 0.0, -PI + 0.1)];
        let pred = Trajectory {
            poses: vec![Pose2D::new(0.0, 0.0, PI - 0.1)],
            has_heading: true,
        };
        assert_abs_diff_eq!(heading_error(&pred, &gt).unwrap(), 0.2, epsilon = 1e-12);

        let no_heading = Trajectory {
            poses: pred.poses.clone(),
            has_heading: false,
        };
        assert!(matches!(
            heading_error(&no_heading, &gt),
            Err(EvalError::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn heading_error_matches_linear_drift_oracle() {
        // Constant gyro bias under pure integration drifts by bias * T.
        use crate::baseline::{dead_reckon};
        use crate::sim::{ImuSample, SAMPLE_RATE};
        let bias = 0.02;
        let n = 1401;
        let imu: Vec<ImuSample<f64>> = (0..n)
            .map(|k| ImuSample {
                t: k as f64 / SAMPLE_RATE,
                accel: [0.0, 0.0, 9.81],
                gyro: [0.0, 0.0, bias],
                mag: [1.0, 0.0, 0.0],
            })
            .collect();
        let poses = dead_reckon(&imu, 0.0, (0.0, 0.0));
        let pred = Trajectory { poses, has_heading: true };
        let gt: Vec<Pose2D<f64>> = (0..n).map(|_| Pose2D::new(0.0, 0.0, 0.0)).collect();
        let expect = bias * 1400.0 / SAMPLE_RATE;
        assert_abs_diff_eq!(heading_error(&pred, &gt).unwrap(), expect, epsilon = 1e-9);
    }

    #[test]
    fn spearman_handles_monotone_and_ties() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let up = [10.0, 20.0, 30.0, 40.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(spearman(&a, &up).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&a, &down).unwrap(), -1.0);
        let tied = [1.0, 1.0, 2.0, 2.0];
        let s: f64 = spearman(&a, &tied).unwrap();
        assert!(s > 0.8 && s <= 1.0);
    }
}
