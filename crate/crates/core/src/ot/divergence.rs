//! Debiased Sinkhorn divergence.

use ndarray::Array1;

use crate::scalar::Scalar;

use super::{
    sinkhorn, squared_distance_matrix, CostMatrix, EmpiricalDistribution, EpsilonSpec, Result,
    SinkhornConfig, SinkhornSolution,
};

/// `S(mu, nu) = W(mu, nu) - (W(mu, mu) + W(nu, nu)) / 2`, each `W` the
/// converged transport value `<gamma, C>` of its own Sinkhorn solve.
///
/// The three solves share one absolute epsilon, resolved from the cross cost
/// when the configuration is relative; a per-matrix epsilon would break the
/// `S(mu, mu) = 0` identity. Returns the divergence value together with the
/// cross solution, whose coupling is what downstream training consumes.
pub fn sinkhorn_divergence<T: Scalar>(
    mu_w: &Array1<T>,
    nu_w: &Array1<T>,
    cross: &CostMatrix<T>,
    self_mu: &CostMatrix<T>,
    self_nu: &CostMatrix<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<(T, SinkhornSolution<T>)> {
    let eps = cfg.epsilon.resolve(cross);
    let shared = SinkhornConfig {
        epsilon: EpsilonSpec::Absolute(eps),
        ..*cfg
    };
    let sol_cross = sinkhorn(cross, mu_w, nu_w, &shared)?;
    let sol_mu = sinkhorn(self_mu, mu_w, mu_w, &shared)?;
    let sol_nu = sinkhorn(self_nu, nu_w, nu_w, &shared)?;
    let half = T::c(0.5);
    let value = sol_cross.coupling.transport_cost
        - half * (sol_mu.coupling.transport_cost + sol_nu.coupling.transport_cost);
    Ok((value, sol_cross))
}

/// Feature-only divergence between two point clouds with cost
/// `alpha * ||x - y||^2`. This is the latent-space dissimilarity measure.
pub fn sinkhorn_divergence_features<T: Scalar>(
    mu: &EmpiricalDistribution<T>,
    nu: &EmpiricalDistribution<T>,
    alpha: T,
    cfg: &SinkhornConfig<T>,
) -> Result<(T, SinkhornSolution<T>)> {
    let cross = CostMatrix::new(squared_distance_matrix(&mu.points, &nu.points)? * alpha, alpha)?;
    let self_mu =
        CostMatrix::new(squared_distance_matrix(&mu.points, &mu.points)? * alpha, alpha)?;
    let self_nu =
        CostMatrix::new(squared_distance_matrix(&nu.points, &nu.points)? * alpha, alpha)?;
    sinkhorn_divergence(&mu.weights, &nu.weights, &cross, &self_mu, &self_nu, cfg)
}
