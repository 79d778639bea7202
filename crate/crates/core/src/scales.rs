//! Coordinate updates of the initial and transition variances.
//!
//! The optimal transition factor is
//! `q(tau^2) ∝ exp(-S / (2x) - (N + c - 1)/2 ln x - d x)` where `N` counts the
//! transition coordinates and `S = E_q[sum ||x_t - x_{t-1}||^2]`: a GIG with
//! `p = (3 - c - N)/2`, `a = 2d`, `b = S`. The initial factor is
//! `q(sigma0^2) ∝ exp(-E||X_1||^2 / (2x) - (n d / 2 + a + 1) ln x - b / x)`,
//! an inverse gamma with shape `n d / 2 + a` and rate `(E||X_1||^2 + 2b) / 2`.

use crate::bessel::log_bessel_k;
use crate::error::{Error, Result};
use crate::model::{
    GigParams, IgParams, ModelConfig, ScaleHyper, ScaleMode, Sigma0Posterior, TauPosterior,
    VariationalState,
};

/// Floor on the expected squared transition norm.
pub const MIN_TRANSITION_SS: f64 = 1e-12;

/// `E[1/X]` for `X ~ GIG(p, a, b)` with density `∝ x^(p-1) exp(-(a x + b/x)/2)`.
///
/// Evaluated as `sqrt(a/b) K_{p-1}(w) / K_p(w)`, `w = sqrt(a b)`, which equals
/// `sqrt(a/b) K_{p+1}(w) / K_p(w) - 2p/b` without the cancellation.
pub fn gig_mean_inverse(p: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Argument(format!(
            "GIG parameters a and b must be positive, got a={a}, b={b}"
        )));
    }
    let w = (a * b).sqrt();
    let log_ratio = log_bessel_k(p - 1.0, w)? - log_bessel_k(p, w)?;
    Ok((a / b).sqrt() * log_ratio.exp())
}

pub fn gig_params(p: f64, a: f64, b: f64) -> Result<GigParams> {
    Ok(GigParams {
        p,
        a,
        b,
        mean_inverse: gig_mean_inverse(p, a, b)?,
    })
}

/// `E_q sum_t ||x_it - x_i(t-1)||^2` for one node, using the stored
/// cross-covariances (zero under mean-field).
pub fn expected_transition_ss(state: &VariationalState, i: usize) -> f64 {
    (0..state.t_len.saturating_sub(1))
        .map(|t| {
            let (a, b) = (state.marginal(i, t), state.marginal(i, t + 1));
            (&b.mean - &a.mean).norm_squared() + a.cov.trace() + b.cov.trace()
                - 2.0 * state.cross_cov(i, t).trace()
        })
        .sum()
}

/// `E_q ||x_i1||^2`.
pub fn expected_initial_ss(state: &VariationalState, i: usize) -> f64 {
    let m = state.marginal(i, 0);
    m.mean.norm_squared() + m.cov.trace()
}

/// Transition-variance factor from `transitions` coordinates with expected
/// squared increment sum `ss`.
pub fn tau_posterior(transitions: f64, ss: f64, h: &ScaleHyper) -> Result<GigParams> {
    if ss.is_nan() {
        return Err(Error::Argument(
            "expected transition sum of squares is NaN".into(),
        ));
    }
    gig_params(
        0.5 * (3.0 - h.c_tau - transitions),
        2.0 * h.d_tau,
        ss.max(MIN_TRANSITION_SS),
    )
}

/// Initial-variance factor from `coords` coordinates with expected squared
/// norm `ss`.
pub fn sigma0_posterior(coords: f64, ss: f64, h: &ScaleHyper) -> IgParams {
    IgParams::new(0.5 * coords + h.a_sigma0, 0.5 * (ss + 2.0 * h.b_sigma0))
}

fn hyper(cfg: &ModelConfig) -> Result<ScaleHyper> {
    match cfg.scales {
        ScaleMode::AdaptiveGlobal(h) | ScaleMode::AdaptiveNodewise(h) => Ok(h),
        ScaleMode::Fixed { .. } => Err(Error::Unsupported(
            "scale update requested with fixed scales".into(),
        )),
    }
}

pub fn update_tau_global(state: &VariationalState, cfg: &ModelConfig) -> Result<GigParams> {
    let h = hyper(cfg)?;
    let ss: f64 = (0..state.n).map(|i| expected_transition_ss(state, i)).sum();
    let transitions = (state.n * state.t_len.saturating_sub(1) * state.d) as f64;
    tau_posterior(transitions, ss, &h)
}

pub fn update_sigma0_global(state: &VariationalState, cfg: &ModelConfig) -> Result<IgParams> {
    let h = hyper(cfg)?;
    let ss: f64 = (0..state.n).map(|i| expected_initial_ss(state, i)).sum();
    Ok(sigma0_posterior((state.n * state.d) as f64, ss, &h))
}

pub fn update_scales_nodewise(
    state: &VariationalState,
    cfg: &ModelConfig,
) -> Result<Vec<(GigParams, IgParams)>> {
    let h = hyper(cfg)?;
    let transitions = (state.t_len.saturating_sub(1) * state.d) as f64;
    (0..state.n)
        .map(|i| {
            let tau = tau_posterior(transitions, expected_transition_ss(state, i), &h)?;
            let sigma0 = sigma0_posterior(state.d as f64, expected_initial_ss(state, i), &h);
            Ok((tau, sigma0))
        })
        .collect()
}

/// Refresh the scale posteriors in place according to the configured mode.
pub fn update_scales(state: &mut VariationalState, cfg: &ModelConfig) -> Result<()> {
    match cfg.scales {
        ScaleMode::Fixed { .. } => {}
        ScaleMode::AdaptiveGlobal(_) => {
            let tau = update_tau_global(state, cfg)?;
            let sigma0 = update_sigma0_global(state, cfg)?;
            state.tau = vec![TauPosterior::Gig(tau)];
            state.sigma0 = vec![Sigma0Posterior::InverseGamma(sigma0)];
        }
        ScaleMode::AdaptiveNodewise(_) => {
            let (tau, sigma0) = update_scales_nodewise(state, cfg)?
                .into_iter()
                .map(|(t, s)| (TauPosterior::Gig(t), Sigma0Posterior::InverseGamma(s)))
                .unzip();
            state.tau = tau;
            state.sigma0 = sigma0;
        }
    }
    Ok(())
}
