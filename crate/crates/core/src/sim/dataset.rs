//! Dataset assembly and on-disk layout.
//!
//! One directory per domain (`domain_<k>/`) holding `imu.csv`
//! (`t,ax,ay,az,gx,gy,gz,mx,my,mz`), `gt.csv` (`t,x,y,phi`) and a
//! `meta.json` with the domain index, offset, seeds, noise parameters and
//! the train/test split.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::rng;
use crate::scalar::Scalar;

use super::{
    imu_from_trajectory, DomainIndex, ImuSample, NoiseModel, Pose2D, Result, Session, SimError,
    TrajectoryConfig, GT_RATE, NUM_DOMAINS, SAMPLES_PER_SEQUENCE, SAMPLE_RATE, SEQUENCE_SECONDS,
};

/// White-noise sigmas and the bias ranges biases are drawn from, one draw
/// per session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub mag_sigma: f64,
    pub accel_bias_range: f64,
    pub gyro_bias_range: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            accel_sigma: 0.05,
            gyro_sigma: 0.005,
            mag_sigma: 0.01,
            accel_bias_range: 0.05,
            gyro_bias_range: 0.002,
        }
    }
}

impl NoiseConfig {
    /// Everything zeroed; sessions become pure kinematics.
    pub fn noiseless() -> Self {
        Self {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            mag_sigma: 0.0,
            accel_bias_range: 0.0,
            gyro_bias_range: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub seqs_per_domain: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub trajectory: TrajectoryConfig,
    pub gravity: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seqs_per_domain: 100,
            seed: 0,
            noise: NoiseConfig::default(),
            trajectory: TrajectoryConfig::default(),
            gravity: 9.81,
        }
    }
}

/// Per-domain train/test sequence indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Deterministic 80/20: every fifth sequence is held out. Sessions with
    /// fewer than five sequences still hold out the last one so the test
    /// split is never empty (unless there is only a single sequence).
    pub fn four_to_one(num_seqs: usize) -> Self {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for q in 0..num_seqs {
            if q % 5 == 4 {
                test.push(q);
            } else {
                train.push(q);
            }
        }
        if test.is_empty() && num_seqs >= 2 {
            test.push(train.pop().expect("at least two sequences"));
        }
        Self { train, test }
    }
}

/// All eight domain sessions plus their splits and noise realizations.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub sessions: Vec<Session<T>>,
    pub splits: Vec<SplitSpec>,
    pub noise: Vec<NoiseModel<T>>,
    pub gravity: T,
}

impl<T: Scalar> Dataset<T> {
    pub fn session(&self, domain: DomainIndex) -> &Session<T> {
        &self.sessions[domain.index()]
    }

    pub fn split(&self, domain: DomainIndex) -> &SplitSpec {
        &self.splits[domain.index()]
    }
}

/// Build all eight domain sessions.
///
/// The long session trajectory is shared bitwise across domains (the rig
/// pairs its indexed recordings the same way), so the only cross-domain
/// differences are the mounting offset, the per-domain noise stream, and
/// the per-domain biases. Sessions are segmented into 20 s sequences and
/// split 80/20 deterministically.
pub fn build_dataset<T: Scalar>(cfg: &DatasetConfig) -> Result<Dataset<T>> {
    if cfg.seqs_per_domain == 0 {
        return Err(SimError::InvalidConfig("seqs_per_domain must be > 0".into()));
    }
    let n_main = cfg.seqs_per_domain * SAMPLES_PER_SEQUENCE;
    let duration = cfg.seqs_per_domain as f64 * SEQUENCE_SECONDS;
    // A few samples of tail margin so groundtruth reaches the final sequence
    // boundary and the central differences stay interior.
    let pad = 3.0 / SAMPLE_RATE;
    let traj_seed = rng::subseed(cfg.seed, "trajectory", 0);
    let path: Vec<(T, Pose2D<T>)> =
        super::generate_trajectory(duration + pad, &cfg.trajectory, traj_seed)?;

    let gt_step = (SAMPLE_RATE / GT_RATE) as usize; // 14 samples
    let gt_count = (duration * GT_RATE) as usize + 1;

    let mut sessions = Vec::with_capacity(NUM_DOMAINS);
    let mut splits = Vec::with_capacity(NUM_DOMAINS);
    let mut noise_models = Vec::with_capacity(NUM_DOMAINS);
    for domain in DomainIndex::all() {
        let k = domain.index();
        let mut bias_rng = rng::stream(cfg.seed, "bias", k as u64);
        let mut draw = |range: f64| -> T { T::c(bias_rng.gen_range(-range..=range)) };
        let noise = NoiseModel {
            accel_sigma: T::c(cfg.noise.accel_sigma),
            gyro_sigma: T::c(cfg.noise.gyro_sigma),
            mag_sigma: T::c(cfg.noise.mag_sigma),
            accel_bias: [
                draw(cfg.noise.accel_bias_range),
                draw(cfg.noise.accel_bias_range),
                draw(cfg.noise.accel_bias_range),
            ],
            gyro_bias: [
                draw(cfg.noise.gyro_bias_range),
                draw(cfg.noise.gyro_bias_range),
                draw(cfg.noise.gyro_bias_range),
            ],
            seed: rng::subseed(cfg.seed, "noise", k as u64),
        };

        let mut imu = imu_from_trajectory(&path, &domain.offset(), &noise, T::c(cfg.gravity));
        imu.truncate(n_main);
        let groundtruth: Vec<(T, Pose2D<T>)> = (0..gt_count)
            .map(|j| path[j * gt_step])
            .collect();

        sessions.push(Session {
            domain,
            imu,
            groundtruth,
            seed: rng::subseed(cfg.seed, "session", k as u64),
        });
        splits.push(SplitSpec::four_to_one(cfg.seqs_per_domain));
        noise_models.push(noise);
    }
    Ok(Dataset {
        sessions,
        splits,
        noise: noise_models,
        gravity: T::c(cfg.gravity),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaJson {
    domain_index: usize,
    offset_cm: f64,
    seed: u64,
    noise_seed: u64,
    accel_sigma: f64,
    gyro_sigma: f64,
    mag_sigma: f64,
    accel_bias: [f64; 3],
    gyro_bias: [f64; 3],
    gravity: f64,
    sample_rate_hz: f64,
    gt_rate_hz: f64,
    sequence_seconds: f64,
    num_sequences: usize,
    split: SplitSpec,
}

/// Persist a dataset under `dir`, one `domain_<k>/` directory per session.
pub fn save_dataset<T: Scalar, P: AsRef<Path>>(dataset: &Dataset<T>, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    for ((session, split), noise) in dataset
        .sessions
        .iter()
        .zip(&dataset.splits)
        .zip(&dataset.noise)
    {
        let ddir = dir.join(format!("domain_{}", session.domain.index()));
        std::fs::create_dir_all(&ddir)?;

        csvio::write_csv(
            ddir.join("imu.csv"),
            &["t", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"],
            session.imu.iter().map(|s| {
                let mut row = Vec::with_capacity(10);
                row.push(csvio::fmt(s.t));
                row.extend(s.accel.iter().map(|v| csvio::fmt(*v)));
                row.extend(s.gyro.iter().map(|v| csvio::fmt(*v)));
                row.extend(s.mag.iter().map(|v| csvio::fmt(*v)));
                row
            }),
        )?;

        csvio::write_csv(
            ddir.join("gt.csv"),
            &["t", "x", "y", "phi"],
            session.groundtruth.iter().map(|(t, p)| {
                vec![csvio::fmt(*t), csvio::fmt(p.x), csvio::fmt(p.y), csvio::fmt(p.phi)]
            }),
        )?;

        let meta = MetaJson {
            domain_index: session.domain.index(),
            offset_cm: session.domain.offset_cm(),
            seed: session.seed,
            noise_seed: noise.seed,
            accel_sigma: noise.accel_sigma.to_f64_c(),
            gyro_sigma: noise.gyro_sigma.to_f64_c(),
            mag_sigma: noise.mag_sigma.to_f64_c(),
            accel_bias: noise.accel_bias.map(|v| v.to_f64_c()),
            gyro_bias: noise.gyro_bias.map(|v| v.to_f64_c()),
            gravity: dataset.gravity.to_f64_c(),
            sample_rate_hz: SAMPLE_RATE,
            gt_rate_hz: GT_RATE,
            sequence_seconds: SEQUENCE_SECONDS,
            num_sequences: session.num_sequences(),
            split: split.clone(),
        };
        let text = serde_json::to_string_pretty(&meta)
            .map_err(|e| SimError::MalformedDataset(e.to_string()))?;
        let tmp = ddir.join("meta.json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, ddir.join("meta.json"))?;
    }
    Ok(())
}

/// Load a dataset previously written by [`save_dataset`].
pub fn load_dataset<T: Scalar, P: AsRef<Path>>(dir: P) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    let mut sessions = Vec::with_capacity(NUM_DOMAINS);
    let mut splits = Vec::with_capacity(NUM_DOMAINS);
    let mut noise_models = Vec::with_capacity(NUM_DOMAINS);
    let mut gravity = 9.81;
    for domain in DomainIndex::all() {
        let ddir = dir.join(format!("domain_{}", domain.index()));
        if !ddir.is_dir() {
            return Err(SimError::MalformedDataset(format!(
                "missing {}",
                ddir.display()
            )));
        }
        let meta: MetaJson = serde_json::from_str(
            &std::fs::read_to_string(ddir.join("meta.json"))?,
        )
        .map_err(|e| SimError::MalformedDataset(format!("meta.json: {e}")))?;
        if meta.domain_index != domain.index() {
            return Err(SimError::MalformedDataset(format!(
                "domain index mismatch in {}",
                ddir.display()
            )));
        }
        gravity = meta.gravity;

        let (header, rows) = csvio::read_csv(ddir.join("imu.csv"))?;
        if header != ["t", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"] {
            return Err(SimError::MalformedDataset("imu.csv header".into()));
        }
        let imu: Vec<ImuSample<T>> = rows
            .iter()
            .map(|r| ImuSample {
                t: T::c(r[0]),
                accel: [T::c(r[1]), T::c(r[2]), T::c(r[3])],
                gyro: [T::c(r[4]), T::c(r[5]), T::c(r[6])],
                mag: [T::c(r[7]), T::c(r[8]), T::c(r[9])],
            })
            .collect();

        let (header, rows) = csvio::read_csv(ddir.join("gt.csv"))?;
        if header != ["t", "x", "y", "phi"] {
            return Err(SimError::MalformedDataset("gt.csv header".into()));
        }
        let groundtruth: Vec<(T, Pose2D<T>)> = rows
            .iter()
            .map(|r| (T::c(r[0]), Pose2D::new(T::c(r[1]), T::c(r[2]), T::c(r[3]))))
            .collect();

        sessions.push(Session {
            domain,
            imu,
            groundtruth,
            seed: meta.seed,
        });
        noise_models.push(NoiseModel {
            accel_sigma: T::c(meta.accel_sigma),
            gyro_sigma: T::c(meta.gyro_sigma),
            mag_sigma: T::c(meta.mag_sigma),
            accel_bias: meta.accel_bias.map(T::c),
            gyro_bias: meta.gyro_bias.map(T::c),
            seed: meta.noise_seed,
        });
        splits.push(meta.split);
    }
    Ok(Dataset {
        sessions,
        splits,
        noise: noise_models,
        gravity: T::c(gravity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> DatasetConfig {
        DatasetConfig {
            seqs_per_domain: 2,
            seed: 3,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn builds_eight_sessions_with_equal_counts_and_offsets() {
        let ds: Dataset<f64> = build_dataset(&tiny_cfg()).unwrap();
        assert_eq!(ds.sessions.len(), 8);
        for (k, s) in ds.sessions.iter().enumerate() {
            assert_eq!(s.imu.len(), 2 * SAMPLES_PER_SEQUENCE);
            assert_eq!(s.num_sequences(), 2);
            assert!((s.domain.offset_cm() - (-0.4 + k as f64)).abs() < 1e-12);
            // Groundtruth reaches the final sequence boundary.
            let last = s.groundtruth.last().unwrap().0;
            assert!((last - 40.0).abs() < 1e-9, "gt ends at {last}");
        }
    }

    #[test]
    fn split_is_80_20() {
        let split = SplitSpec::four_to_one(100);
        assert_eq!(split.train.len(), 80);
        assert_eq!(split.test.len(), 20);
        assert!(split.test.contains(&4) && split.test.contains(&99));
    }

    #[test]
    fn sessions_share_the_trajectory_but_not_the_noise() {
        let ds: Dataset<f64> = build_dataset(&tiny_cfg()).unwrap();
        let a = &ds.sessions[0];
        let b = &ds.sessions[5];
        for (p, q) in a.groundtruth.iter().zip(&b.groundtruth) {
            assert_eq!(p.1.x.to_bits(), q.1.x.to_bits());
        }
        assert!(a.imu.iter().zip(&b.imu).any(|(x, y)| x.gyro[2] != y.gyro[2]));
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let ds: Dataset<f64> = build_dataset(&tiny_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back: Dataset<f64> = load_dataset(dir.path()).unwrap();
        for (s, t) in ds.sessions.iter().zip(&back.sessions) {
            assert_eq!(s.imu.len(), t.imu.len());
            for (a, b) in s.imu.iter().zip(&t.imu) {
                assert_eq!(a.t.to_bits(), b.t.to_bits());
                for c in 0..3 {
                    assert_eq!(a.accel[c].to_bits(), b.accel[c].to_bits());
                    assert_eq!(a.gyro[c].to_bits(), b.gyro[c].to_bits());
                    assert_eq!(a.mag[c].to_bits(), b.mag[c].to_bits());
                }
            }
            for (a, b) in s.groundtruth.iter().zip(&t.groundtruth) {
                assert_eq!(a.0.to_bits(), b.0.to_bits());
                assert_eq!(a.1.phi.to_bits(), b.1.phi.to_bits());
            }
        }
        for (s, t) in ds.splits.iter().zip(&back.splits) {
            assert_eq!(s.train, t.train);
            assert_eq!(s.test, t.test);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a: Dataset<f64> = build_dataset(&tiny_cfg()).unwrap();
        let b: Dataset<f64> = build_dataset(&tiny_cfg()).unwrap();
        for (s, t) in a.sessions.iter().zip(&b.sessions) {
            for (x, y) in s.imu.iter().zip(&t.imu) {
                assert_eq!(x.accel[0].to_bits(), y.accel[0].to_bits());
            }
        }
    }
}
