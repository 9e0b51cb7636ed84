//! Log-domain Sinkhorn iterations for entropically regularized transport.

use ndarray::{Array1, Array2};

use crate::scalar::Scalar;

use super::{validate_weights, CostMatrix, Coupling, OtError, Result, SinkhornConfig};

/// Output of [`sinkhorn`]. A non-converged solve still carries the best
/// iterate so that callers in training loops can decide what to do with it.
#[derive(Debug, Clone)]
pub struct SinkhornSolution<T> {
    pub coupling: Coupling<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Resolved (absolute) regularization actually used.
    pub epsilon: T,
}

#[inline]
fn logsumexp<T: Scalar>(len: usize, mut f: impl FnMut(usize) -> T) -> T {
    let mut max = T::neg_infinity();
    for k in 0..len {
        let v = f(k);
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = T::zero();
    for k in 0..len {
        sum += (f(k) - max).exp();
    }
    max + sum.ln()
}

fn log_or_neg_inf<T: Scalar>(w: &Array1<T>) -> Array1<T> {
    w.mapv(|x| if x > T::zero() { x.ln() } else { T::neg_infinity() })
}

/// Solve `min <gamma, C> - eps * h(gamma)` over couplings of `(mu_w, nu_w)`
/// with `h` the Shannon entropy, by dual-potential updates in log space.
///
/// Terminates when the largest marginal violation of the current plan drops
/// to `cfg.marginal_tol`, or after `cfg.max_iters` sweeps (flagged, best
/// iterate returned). Column marginals are exact after every sweep by
/// construction; the row residual is what is monitored.
pub fn sinkhorn<T: Scalar>(
    cost: &CostMatrix<T>,
    mu_w: &Array1<T>,
    nu_w: &Array1<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornSolution<T>> {
    cfg.validate()?;
    let n = mu_w.len();
    let m = nu_w.len();
    if cost.values.nrows() != n || cost.values.ncols() != m {
        return Err(OtError::DimensionMismatch(format!(
            "cost {}x{} vs weights {}x{}",
            cost.values.nrows(),
            cost.values.ncols(),
            n,
            m
        )));
    }
    for ((i, j), v) in cost.values.indexed_iter() {
        if !v.is_finite() {
            return Err(OtError::NonFiniteCost(i, j));
        }
    }
    validate_weights(mu_w)?;
    validate_weights(nu_w)?;

    let eps = cfg.epsilon.resolve(cost);
    let c = &cost.values;
    let log_mu = log_or_neg_inf(mu_w);
    let log_nu = log_or_neg_inf(nu_w);

    let mut f: Array1<T> = Array1::zeros(n);
    let mut g: Array1<T> = Array1::zeros(m);
    let mut row_lse: Array1<T> = Array1::zeros(n);

    let sweep = |f: &mut Array1<T>, g: &mut Array1<T>, row_lse: &Array1<T>, e: T| {
        for i in 0..n {
            f[i] = if log_mu[i].is_finite() {
                e * (log_mu[i] - row_lse[i])
            } else {
                T::neg_infinity()
            };
        }
        for j in 0..m {
            let lse = logsumexp(n, |i| (f[i] - c[[i, j]]) / e);
            g[j] = if log_nu[j].is_finite() {
                e * (log_nu[j] - lse)
            } else {
                T::neg_infinity()
            };
        }
    };

    // Epsilon annealing: warm-start the dual potentials from gentler
    // regularization, stepping down toward the target. Plain iterations
    // stall for small epsilon; the returned plan always solves the
    // target-epsilon problem.
    let mut stages = Vec::new();
    let mut e = cost.mean();
    while e > eps * T::c(3.0) {
        stages.push(e);
        e = e / T::c(3.0);
    }

    let mut iterations = 0usize;
    const WARMUP_SWEEPS: usize = 8;
    'warmup: for &se in &stages {
        for _ in 0..WARMUP_SWEEPS {
            if iterations >= cfg.max_iters {
                break 'warmup;
            }
            for i in 0..n {
                row_lse[i] = logsumexp(m, |j| (g[j] - c[[i, j]]) / se);
            }
            sweep(&mut f, &mut g, &row_lse, se);
            iterations += 1;
        }
    }

    // Final stage at the target epsilon. `row_lse` doubles as the
    // row-marginal residual check for the plan induced by (f, g); it is
    // meaningful once at least one sweep has run at this epsilon (column
    // marginals are exact right after a sweep).
    let mut converged = false;
    let mut settled_at_target = false;
    while iterations < cfg.max_iters {
        for i in 0..n {
            row_lse[i] = logsumexp(m, |j| (g[j] - c[[i, j]]) / eps);
        }
        if settled_at_target {
            let mut worst = T::zero();
            for i in 0..n {
                let row_sum = (f[i] / eps + row_lse[i]).exp();
                worst = worst.max((row_sum - mu_w[i]).abs());
            }
            if worst <= cfg.marginal_tol {
                converged = true;
                break;
            }
        }
        sweep(&mut f, &mut g, &row_lse, eps);
        settled_at_target = true;
        iterations += 1;
    }

    let mut gamma = Array2::zeros((n, m));
    let mut transport_cost = T::zero();
    for i in 0..n {
        for j in 0..m {
            let log_p = (f[i] + g[j] - c[[i, j]]) / eps;
            let p = if log_p.is_finite() || log_p == T::neg_infinity() {
                log_p.exp()
            } else {
                T::zero()
            };
            gamma[[i, j]] = p;
            transport_cost += p * c[[i, j]];
        }
    }

    Ok(SinkhornSolution {
        coupling: Coupling { gamma, transport_cost },
        converged,
        iterations,
        epsilon: eps,
    })
}
