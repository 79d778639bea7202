//! Fully factorized mean-field baseline: one Gaussian per `(node, time)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::add_likelihood_terms;
use crate::model::{
    CanonicalGaussian, GaussianMoment, ModelConfig, NetworkSeries, VariationalState,
};

/// Optimal `q(x_it)` holding everything else fixed.
///
/// Precision `E[1/tau^2] * (#temporal neighbours) + [t = 0] E[1/sigma0^2]`
/// plus the likelihood term; the shift pulls toward the neighbouring means.
pub fn mf_update_node_time(
    i: usize,
    t: usize,
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<GaussianMoment> {
    let d = state.d;
    let inv_tau2 = state.tau_mean_inverse(i);
    let mut diag = 0.0;
    let mut h = DVector::zeros(d);
    if t > 0 {
        diag += inv_tau2;
        h.axpy(inv_tau2, state.mean(i, t - 1), 1.0);
    }
    if t + 1 < state.t_len {
        diag += inv_tau2;
        h.axpy(inv_tau2, state.mean(i, t + 1), 1.0);
    }
    if t == 0 {
        diag += state.sigma0_mean_inverse(i);
    }
    let mut j = DMatrix::from_diagonal_element(d, d, diag);
    add_likelihood_terms(i, t, state, data, cfg.alpha, &mut j, &mut h);
    CanonicalGaussian { j, h }
        .to_moment()
        .map_err(|_| Error::NotPositiveDefinite {
            context: "mean-field node update",
            node: Some(i),
            time: Some(t),
        })
}

/// Gauss-Seidel pass over nodes (outer) and times (inner), followed by the
/// intercept, tangent and scale updates.
pub fn mf_sweep(
    state: &mut VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<()> {
    for i in 0..state.n {
        for t in 0..state.t_len {
            let updated = mf_update_node_time(i, t, state, data, cfg)?;
            state.marginals[i * state.t_len + t] = updated;
        }
    }
    crate::engine::global_updates(state, data, cfg)
}
