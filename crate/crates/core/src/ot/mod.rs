//! Entropic optimal transport: 1-D Wasserstein distances, a log-domain
//! Sinkhorn solver, the joint feature+label cost used for adaptation, and
//! the debiased Sinkhorn divergence.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::scalar::Scalar;

mod divergence;
mod sinkhorn;
mod wasserstein;

pub use divergence::{sinkhorn_divergence, sinkhorn_divergence_features};
pub use sinkhorn::{sinkhorn, SinkhornSolution};
pub use wasserstein::{wasserstein_1d, wasserstein_1d_unsorted, CostExponent};

#[derive(Debug, Error)]
pub enum OtError {
    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cost matrix contains a non-finite entry at ({0}, {1})")]
    NonFiniteCost(usize, usize),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, OtError>;

/// Weighted point cloud standing in for an empirical distribution.
///
/// `points` is `n x d`; `weights` are non-negative and sum to one.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution<T> {
    pub points: Array2<T>,
    pub weights: Array1<T>,
}

impl<T: Scalar> EmpiricalDistribution<T> {
    pub fn new(points: Array2<T>, weights: Array1<T>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(OtError::EmptySample);
        }
        if points.nrows() != weights.len() {
            return Err(OtError::DimensionMismatch(format!(
                "{} points vs {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        validate_weights(&weights)?;
        Ok(Self { points, weights })
    }

    /// Uniform weights `1/n` on every point.
    pub fn uniform(points: Array2<T>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(OtError::EmptySample);
        }
        let w = Array1::from_elem(n, T::one() / T::c(n as f64));
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }
}

fn validate_weights<T: Scalar>(w: &Array1<T>) -> Result<()> {
    if w.iter().any(|x| *x < T::zero() || !x.is_finite()) {
        return Err(OtError::InvalidWeights("negative or non-finite mass".into()));
    }
    let sum = w.iter().copied().sum::<T>().to_f64_c();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(OtError::InvalidWeights(format!("mass sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Pairwise cost between two point clouds, `n_mu x n_nu`, entries >= 0.
///
/// `alpha` records the scale applied to the feature term when the matrix was
/// built (1 for plain squared-distance costs).
#[derive(Debug, Clone)]
pub struct CostMatrix<T> {
    pub values: Array2<T>,
    pub alpha: T,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn new(values: Array2<T>, alpha: T) -> Result<Self> {
        for ((i, j), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(OtError::NonFiniteCost(i, j));
            }
        }
        Ok(Self { values, alpha })
    }

    pub fn mean(&self) -> T {
        let n = self.values.len();
        if n == 0 {
            return T::zero();
        }
        self.values.iter().copied().sum::<T>() / T::c(n as f64)
    }
}

/// Entropic transport plan with prescribed marginals.
#[derive(Debug, Clone)]
pub struct Coupling<T> {
    /// `gamma[i][j]`: mass moved from source atom `i` to target atom `j`.
    pub gamma: Array2<T>,
    /// Frobenius inner product `<gamma, C>`.
    pub transport_cost: T,
}

impl<T: Scalar> Coupling<T> {
    /// Largest violation of the row/column marginal constraints.
    pub fn max_marginal_violation(&self, mu_w: &Array1<T>, nu_w: &Array1<T>) -> T {
        let mut worst = T::zero();
        for (i, &m) in mu_w.iter().enumerate() {
            let row = self.gamma.row(i).iter().copied().sum::<T>();
            worst = worst.max((row - m).abs());
        }
        for (j, &n) in nu_w.iter().enumerate() {
            let col = self.gamma.column(j).iter().copied().sum::<T>();
            worst = worst.max((col - n).abs());
        }
        worst
    }
}

/// Entropic regularization strength.
///
/// `Relative(r)` resolves to `r * mean(C)` for the cost matrix at hand, which
/// keeps the knob dimensionless across differently scaled costs.
#[derive(Debug, Clone, Copy)]
pub enum EpsilonSpec<T> {
    Absolute(T),
    Relative(T),
}

impl<T: Scalar> EpsilonSpec<T> {
    pub fn resolve(&self, cost: &CostMatrix<T>) -> T {
        let eps = match *self {
            EpsilonSpec::Absolute(e) => e,
            EpsilonSpec::Relative(r) => r * cost.mean(),
        };
        // An all-zero cost makes any feasible plan optimal; any positive
        // epsilon yields the same (product) coupling.
        if eps > T::zero() {
            eps
        } else {
            T::c(1e-9)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SinkhornConfig<T> {
    pub epsilon: EpsilonSpec<T>,
    pub max_iters: usize,
    pub marginal_tol: T,
    /// Ground cost for the 1-D distance.
    pub cost_exponent: CostExponent,
}

impl<T: Scalar> Default for SinkhornConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: EpsilonSpec::Relative(T::c(0.1)),
            max_iters: 500,
            marginal_tol: T::c(1e-6),
            cost_exponent: CostExponent::Linear,
        }
    }
}

impl<T: Scalar> SinkhornConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = match self.epsilon {
            EpsilonSpec::Absolute(e) => e > T::zero(),
            EpsilonSpec::Relative(r) => r > T::zero(),
        };
        if !eps_ok {
            return Err(OtError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.marginal_tol <= T::zero() {
            return Err(OtError::InvalidConfig("marginal_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Squared Euclidean distances between the rows of `a` and the rows of `b`.
pub fn squared_distance_matrix<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> Result<Array2<T>> {
    if a.ncols() != b.ncols() {
        return Err(OtError::DimensionMismatch(format!(
            "point dims {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ai) in a.rows().into_iter().enumerate() {
        for (j, bj) in b.rows().into_iter().enumerate() {
            let mut d = T::zero();
            for (x, y) in ai.iter().zip(bj.iter()) {
                let diff = *x - *y;
                d += diff * diff;
            }
            out[[i, j]] = d;
        }
    }
    Ok(out)
}

/// Joint feature+label transport cost:
/// `C[i][j] = alpha * ||mu_i - nu_j||^2 + ||y_i - yhat_j||^2`,
/// where `yhat` are the current predictions on the unlabeled side.
pub fn joint_cost<T: Scalar>(
    src_latents: &Array2<T>,
    src_labels: &Array2<T>,
    tgt_latents: &Array2<T>,
    tgt_predictions: &Array2<T>,
    alpha: T,
) -> Result<CostMatrix<T>> {
    if src_latents.nrows() != src_labels.nrows() {
        return Err(OtError::DimensionMismatch("source latents vs labels".into()));
    }
    if tgt_latents.nrows() != tgt_predictions.nrows() {
        return Err(OtError::DimensionMismatch("target latents vs predictions".into()));
    }
    if src_labels.ncols() != tgt_predictions.ncols() {
        return Err(OtError::DimensionMismatch("label dims".into()));
    }
    let feat = squared_distance_matrix(src_latents, tgt_latents)?;
    let lab = squared_distance_matrix(src_labels, tgt_predictions)?;
    CostMatrix::new(feat * alpha + &lab, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn joint_cost_zero_alpha_matching_labels_has_zero_diagonal() {
        let lat_s = array![[1.0, 0.0], [0.0, 2.0]];
        let lat_t = array![[5.0, 5.0], [-3.0, 1.0]];
        let labels = array![[0.1, -0.2], [0.4, 0.3]];
        let c = joint_cost(&lat_s, &labels, &lat_t, &labels, 0.0).unwrap();
        assert_abs_diff_eq!(c.values[[0, 0]], 0.0);
        assert_abs_diff_eq!(c.values[[1, 1]], 0.0);
    }

    #[test]
    fn joint_cost_single_pair_arithmetic() {
        // feature distance^2 = 4, label distance^2 = 1, alpha = 0.5 -> 3
        let c = joint_cost(
            &array![[0.0, 0.0]],
            &array![[0.0, 0.0]],
            &array![[2.0, 0.0]],
            &array![[1.0, 0.0]],
            0.5,
        )
        .unwrap();
        assert_abs_diff_eq!(c.values[[0, 0]], 3.0);
    }

    #[test]
    fn joint_cost_invariant_under_common_latent_rotation() {
        let rot = |p: &Array2<f64>, th: f64| -> Array2<f64> {
            let (s, c) = th.sin_cos();
            let mut out = p.clone();
            for mut row in out.rows_mut() {
                let (x, y) = (row[0], row[1]);
                row[0] = c * x - s * y;
                row[1] = s * x + c * y;
            }
            out
        };
        let a = array![[1.0, 2.0], [-0.5, 0.3], [2.0, -1.0]];
        let b = array![[0.2, 0.1], [1.5, -2.0]];
        let ya = array![[0.1, 0.0], [0.0, 0.2], [0.3, 0.1]];
        let yb = array![[0.0, 0.0], [0.2, 0.2]];
        let c0 = joint_cost(&a, &ya, &b, &yb, 0.7).unwrap();
        let c1 = joint_cost(&rot(&a, 1.234), &ya, &rot(&b, 1.234), &yb, 0.7).unwrap();
        for (x, y) in c0.values.iter().zip(c1.values.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn joint_cost_rejects_mismatched_dims() {
        let r = joint_cost(
            &array![[0.0, 0.0]],
            &array![[0.0]],
            &array![[0.0, 0.0, 1.0]],
            &array![[0.0]],
            1.0,
        );
        assert!(matches!(r, Err(OtError::DimensionMismatch(_))));
    }

    #[test]
    fn uniform_distribution_validates() {
        let d = EmpiricalDistribution::uniform(array![[1.0f32], [2.0], [3.0]]).unwrap();
        assert_eq!(d.len(), 3);
        assert!(EmpiricalDistribution::<f64>::uniform(Array2::zeros((0, 2))).is_err());
        let bad = EmpiricalDistribution::new(array![[1.0]], array![0.5]);
        assert!(matches!(bad, Err(OtError::InvalidWeights(_))));
    }
}
