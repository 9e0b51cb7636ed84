//! The cross-domain analysis matrices.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::ot::{
    sinkhorn_divergence_features, wasserstein_1d, CostExponent, EmpiricalDistribution,
    SinkhornConfig,
};
use crate::rng;
use crate::scalar::Scalar;
use crate::sim::{Dataset, DomainIndex, NUM_DOMAINS};
use crate::tracker::{encode, sequence_batch, TrackerParams};

use super::{
    percentile, sequence_errors, ErrorMatrix, ErrorMatrixKind, EvalError, Result, ShiftKind,
    ShiftMatrix,
};

/// Cross-domain test grid of per-domain models: entry `(i, j)` is the
/// 90th-percentile endpoint error of the model trained on domain `i`,
/// evaluated on domain `j`'s test split.
pub fn fragility_matrix<T: Scalar>(
    per_domain: &[TrackerParams<T>],
    dataset: &Dataset<T>,
) -> Result<ErrorMatrix<T>> {
    if per_domain.len() != NUM_DOMAINS {
        return Err(EvalError::MissingCheckpoints(NUM_DOMAINS, per_domain.len()));
    }
    let mut values = Array2::zeros((NUM_DOMAINS, NUM_DOMAINS));
    for (i, params) in per_domain.iter().enumerate() {
        for domain in DomainIndex::all() {
            let errs = sequence_errors(params, dataset, domain, &dataset.split(domain).test)?;
            let d: Vec<T> = errs.iter().map(|e| e.distance).collect();
            values[[i, domain.index()]] = percentile(&d, 90.0)?;
        }
    }
    Ok(ErrorMatrix {
        values,
        kind: ErrorMatrixKind::Fragility,
        metric: "p90_distance_m".into(),
    })
}

/// Empirical CDF of one domain's acceleration-norm distribution, as
/// `(value, quantile)` pairs on a fixed quantile grid.
#[derive(Debug, Clone)]
pub struct CdfTable<T> {
    pub domain: usize,
    pub points: Vec<(T, T)>,
}

/// Pairwise 1-D Wasserstein distances (`c(d) = d`) between the
/// `||accel||_2` distributions of all domains, plus each domain's CDF table
/// for plotting.
pub fn raw_shift_matrix<T: Scalar>(
    dataset: &Dataset<T>,
    cdf_points: usize,
) -> Result<(ShiftMatrix<T>, Vec<CdfTable<T>>)> {
    let mut sorted_norms: Vec<Vec<T>> = Vec::with_capacity(NUM_DOMAINS);
    for session in &dataset.sessions {
        let mut norms: Vec<T> = session
            .imu
            .iter()
            .map(|s| {
                (s.accel[0] * s.accel[0] + s.accel[1] * s.accel[1] + s.accel[2] * s.accel[2])
                    .sqrt()
            })
            .collect();
        norms.sort_by(|a, b| a.partial_cmp(b).expect("finite accel"));
        sorted_norms.push(norms);
    }

    let mut values = Array2::zeros((NUM_DOMAINS, NUM_DOMAINS));
    for i in 0..NUM_DOMAINS {
        for j in i + 1..NUM_DOMAINS {
            let w = wasserstein_1d(&sorted_norms[i], &sorted_norms[j], CostExponent::Linear)?;
            values[[i, j]] = w;
            values[[j, i]] = w;
        }
    }

    let tables = sorted_norms
        .iter()
        .enumerate()
        .map(|(domain, sorted)| {
            let n = sorted.len();
            let points = (1..=cdf_points)
                .map(|k| {
                    let rank = (k * n).div_ceil(cdf_points);
                    (sorted[rank - 1], T::c(k as f64 / cdf_points as f64))
                })
                .collect();
            CdfTable { domain, points }
        })
        .collect();

    Ok((
        ShiftMatrix {
            values,
            kind: ShiftKind::RawAccelW1,
        },
        tables,
    ))
}

#[derive(Debug, Clone)]
pub struct ShiftConfig<T> {
    /// Windows subsampled per domain for the divergence estimate.
    pub n_ot: usize,
    /// Scale on the squared-distance feature cost.
    pub alpha: T,
    pub sinkhorn: SinkhornConfig<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for ShiftConfig<T> {
    fn default() -> Self {
        Self {
            n_ot: 128,
            alpha: T::one(),
            sinkhorn: SinkhornConfig {
                max_iters: 2000,
                ..SinkhornConfig::default()
            },
            seed: 0,
        }
    }
}

/// Pairwise debiased Sinkhorn divergences between the latent distributions
/// of per-domain models, each evaluated on its own domain's test split with
/// a feature-only cost. One subsample per domain is drawn and reused on
/// both sides, so the diagonal is exactly the self-divergence.
pub fn latent_shift_matrix<T: Scalar>(
    per_domain: &[TrackerParams<T>],
    dataset: &Dataset<T>,
    cfg: &ShiftConfig<T>,
) -> Result<ShiftMatrix<T>> {
    if per_domain.len() != NUM_DOMAINS {
        return Err(EvalError::MissingCheckpoints(NUM_DOMAINS, per_domain.len()));
    }
    let mut clouds: Vec<EmpiricalDistribution<T>> = Vec::with_capacity(NUM_DOMAINS);
    for (k, params) in per_domain.iter().enumerate() {
        let domain = DomainIndex::new(k).expect("k < 8");
        let batch = sequence_batch(
            dataset.session(domain),
            &dataset.split(domain).test,
            &params.cfg,
            dataset.gravity,
        )?;
        let latents = encode(params, &batch)?.values;
        let n = latents.nrows();
        let take = cfg.n_ot.min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(cfg.seed, "latent-subsample", k as u64));
        idx.truncate(take);
        idx.sort_unstable();
        clouds.push(EmpiricalDistribution::uniform(latents.select(Axis(0), &idx))?);
    }

    let mut values = Array2::zeros((NUM_DOMAINS, NUM_DOMAINS));
    for i in 0..NUM_DOMAINS {
        for j in i..NUM_DOMAINS {
            let (v, _) =
                sinkhorn_divergence_features(&clouds[i], &clouds[j], cfg.alpha, &cfg.sinkhorn)?;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(ShiftMatrix {
        values,
        kind: ShiftKind::LatentDivergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_dataset, DatasetConfig, NoiseConfig};
    use crate::tracker::{Head, TrackerConfig};

    fn tiny_noiseless() -> Dataset<f64> {
        build_dataset(&DatasetConfig {
            seqs_per_domain: 2,
            seed: 21,
            noise: NoiseConfig::noiseless(),
            ..DatasetConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn raw_shift_matrix_is_symmetric_zero_diagonal_and_monotone_from_domain_zero() {
        let ds = tiny_noiseless();
        let (m, tables) = raw_shift_matrix(&ds, 50).unwrap();
        assert!(m.max_violation() <= 1e-12);
        for k in 2..NUM_DOMAINS {
            assert!(
                m.values[[0, k]] >= m.values[[0, k - 1]] - 1e-12,
                "row 0 not monotone at column {k}: {} < {}",
                m.values[[0, k]],
                m.values[[0, k - 1]]
            );
        }
        assert_eq!(tables.len(), 8);
        for t in &tables {
            assert_eq!(t.points.len(), 50);
            // CDF values are non-decreasing in the quantile.
            assert!(t.points.windows(2).all(|w| w[0].0 <= w[1].0));
            assert!((t.points.last().unwrap().1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fragility_matrix_is_finite_and_nonnegative() {
        let ds = tiny_noiseless();
        let mut cfg = TrackerConfig::default_with_head(Head::Cartesian);
        cfg.conv1_out = 4;
        cfg.conv2_out = 4;
        cfg.hidden = 8;
        cfg.latent = 4;
        cfg.reg_hidden = 4;
        let models: Vec<TrackerParams<f64>> = (0..8)
            .map(|k| TrackerParams::init(cfg, k as u64).unwrap())
            .collect();
        let m = fragility_matrix(&models, &ds).unwrap();
        assert!(m.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(matches!(m.kind, ErrorMatrixKind::Fragility));
    }

    #[test]
    fn latent_shift_diagonal_is_zero_and_matrix_symmetric() {
        let ds = tiny_noiseless();
        let mut cfg = TrackerConfig::default_with_head(Head::Cartesian);
        cfg.conv1_out = 4;
        cfg.conv2_out = 4;
        cfg.hidden = 8;
        cfg.latent = 4;
        cfg.reg_hidden = 4;
        let models: Vec<TrackerParams<f64>> = (0..8)
            .map(|k| TrackerParams::init(cfg, 100 + k as u64).unwrap())
            .collect();
        let shift_cfg = ShiftConfig {
            n_ot: 24,
            ..ShiftConfig::default()
        };
        let m = latent_shift_matrix(&models, &ds, &shift_cfg).unwrap();
        for k in 0..8 {
            assert!(m.values[[k, k]].abs() <= 1e-5, "diagonal {}", m.values[[k, k]]);
        }
        assert!(m.max_violation() <= 1e-5);
    }

    #[test]
    fn wrong_checkpoint_count_is_an_error() {
        let ds = tiny_noiseless();
        let cfg = TrackerConfig::tiny(Head::Cartesian);
        let one = vec![TrackerParams::<f64>::init(cfg, 0).unwrap()];
        assert!(matches!(
            fragility_matrix(&one, &ds),
            Err(EvalError::MissingCheckpoints(8, 1))
        ));
    }
}
