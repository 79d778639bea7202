//! Sweep scheduling, stopping rules and the fixed-scale ELBO.

use std::time::Instant;

use rayon::prelude::*;

use crate::chain::{smooth, ChainMarginals};
use crate::error::{Error, Result};
use crate::likelihood::{node_potentials, tangent_coeffs, update_beta, update_xi};
use crate::linalg::{gaussian_entropy, quad_form, trace_product};
use crate::metrics::auc;
use crate::model::{
    init_state, Family, FitResult, LikelihoodKind, ModelConfig, NetworkSeries, ScaleMode,
    TraceRecord, VariationalState,
};
use crate::scales::{expected_initial_ss, expected_transition_ss, update_scales};

/// Minimum training AUC before the bernoulli stopping rule may fire.
pub const AUC_GUARD: f64 = 0.55;

/// Intercept, tangent parameters (bernoulli) and scales, in that order.
pub fn global_updates(
    state: &mut VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<()> {
    state.beta = update_beta(state, data, cfg)?;
    if data.kind() == LikelihoodKind::Bernoulli {
        update_xi(state, data);
    }
    update_scales(state, cfg)
}

fn store_chain(state: &mut VariationalState, i: usize, chain: ChainMarginals) {
    let t_len = state.t_len;
    for (t, m) in chain.unary.into_iter().enumerate() {
        state.marginals[i * t_len + t] = m;
    }
    for (t, c) in chain.cross.into_iter().enumerate() {
        state.cross[i * (t_len - 1) + t] = c;
    }
}

/// One structured mean-field sweep: every node chain is re-smoothed given
/// the others, then the global factors are refreshed.
pub fn sweep_smf(
    state: &mut VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<()> {
    if cfg.jacobi {
        let snapshot = &*state;
        let chains: Vec<ChainMarginals> = (0..snapshot.n)
            .into_par_iter()
            .map(|i| smooth(&node_potentials(i, snapshot, data, cfg)).map_err(|e| e.at_node(i)))
            .collect::<Result<_>>()?;
        for (i, chain) in chains.into_iter().enumerate() {
            store_chain(state, i, chain);
        }
    } else {
        for i in 0..state.n {
            let chain = smooth(&node_potentials(i, state, data, cfg)).map_err(|e| e.at_node(i))?;
            store_chain(state, i, chain);
        }
    }
    global_updates(state, data, cfg)
}

pub fn sweep(state: &mut VariationalState, data: &NetworkSeries, cfg: &ModelConfig) -> Result<()> {
    match cfg.family {
        Family::Smf => sweep_smf(state, data, cfg),
        Family::Mf => crate::mf::mf_sweep(state, data, cfg),
    }
}

/// Plug-in linear predictor `mu_beta + mu_it' mu_jt`.
#[inline]
pub fn plug_in_logit(state: &VariationalState, t: usize, i: usize, j: usize) -> f64 {
    state.beta.mean + state.mean(i, t).dot(state.mean(j, t))
}

/// Training AUC (bernoulli) or training RMSE (gaussian) over observed pairs.
///
/// A bernoulli series with a single observed class has no ranking
/// information; its AUC is reported as 0.5.
pub fn stopping_statistic(state: &VariationalState, data: &NetworkSeries) -> f64 {
    match data.kind() {
        LikelihoodKind::Bernoulli => {
            let (scores, labels): (Vec<f64>, Vec<bool>) = data
                .observed_pairs()
                .map(|(t, i, j)| (plug_in_logit(state, t, i, j), data.value(t, i, j) == 1.0))
                .unzip();
            auc(&scores, &labels).unwrap_or(0.5)
        }
        LikelihoodKind::Gaussian => {
            let mut ss = 0.0;
            let mut count = 0usize;
            for (t, i, j) in data.observed_pairs() {
                let r = plug_in_logit(state, t, i, j) - data.value(t, i, j);
                ss += r * r;
                count += 1;
            }
            if count == 0 {
                0.0
            } else {
                (ss / count as f64).sqrt()
            }
        }
    }
}

fn entropy(cov: &nalgebra::DMatrix<f64>, what: &'static str) -> Result<f64> {
    gaussian_entropy(cov).ok_or(Error::NotPositiveDefinite {
        context: what,
        node: None,
        time: None,
    })
}

/// Evidence lower bound for fixed scales.
///
/// Gaussian data gives the exact ELBO of the fractional posterior; bernoulli
/// data gives the tangent-transform lower bound at the current `xi`. Chain
/// entropies use the pairwise marginals, so the same code covers both
/// families (mean-field cross-covariances are zero).
pub fn elbo_fixed_scale(
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<f64> {
    let ScaleMode::Fixed { sigma0, tau } = cfg.scales else {
        return Err(Error::Unsupported(
            "the ELBO is only available with fixed scales".into(),
        ));
    };
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let alpha = cfg.alpha;
    let beta = state.beta;
    let d = state.d as f64;

    let mut lik = 0.0;
    for (t, i, j) in data.observed_pairs() {
        let (mi, mj) = (state.marginal(i, t), state.marginal(j, t));
        let inner = mi.mean.dot(&mj.mean);
        let var_inner = quad_form(&mj.cov, &mi.mean)
            + quad_form(&mi.cov, &mj.mean)
            + trace_product(&mi.cov, &mj.cov);
        let y = data.value(t, i, j);
        lik += match data.kind() {
            LikelihoodKind::Gaussian => {
                let s2 = data.noise_sd().map_or(1.0, |s| s * s);
                let r = y - beta.mean - inner;
                -0.5 * (ln2pi + s2.ln()) - (r * r + beta.var + var_inner) / (2.0 * s2)
            }
            LikelihoodKind::Bernoulli => {
                let (a, c) = tangent_coeffs(state.xi(t, i, j));
                let m = beta.mean + inner;
                let sq = m * m + beta.var + var_inner;
                a * sq + (y - 0.5) * m + c
            }
        };
    }
    lik *= alpha;

    let (s02, tau2) = (sigma0 * sigma0, tau * tau);
    let mut prior = 0.0;
    let mut ent = 0.0;
    for i in 0..state.n {
        prior += -0.5 * d * (ln2pi + s02.ln()) - expected_initial_ss(state, i) / (2.0 * s02);
        let transitions = state.t_len.saturating_sub(1) as f64;
        prior += -0.5 * d * transitions * (ln2pi + tau2.ln())
            - expected_transition_ss(state, i) / (2.0 * tau2);

        for t in 0..state.t_len {
            ent += entropy(&state.marginal(i, t).cov, "ELBO marginal entropy")?;
        }
        for t in 0..state.t_len.saturating_sub(1) {
            let (a, b) = (state.marginal(i, t), state.marginal(i, t + 1));
            let k = state.d;
            let mut joint = nalgebra::DMatrix::zeros(2 * k, 2 * k);
            joint.view_mut((0, 0), (k, k)).copy_from(&a.cov);
            joint.view_mut((k, k), (k, k)).copy_from(&b.cov);
            let c = state.cross_cov(i, t);
            joint.view_mut((0, k), (k, k)).copy_from(c);
            joint.view_mut((k, 0), (k, k)).copy_from(&c.transpose());
            ent += entropy(&joint, "ELBO pairwise entropy")?
                - entropy(&a.cov, "ELBO marginal entropy")?
                - entropy(&b.cov, "ELBO marginal entropy")?;
        }
    }

    let bp = cfg.beta_prior;
    let beta_prior =
        -0.5 * (ln2pi + bp.var.ln()) - ((beta.mean - bp.mean).powi(2) + beta.var) / (2.0 * bp.var);
    let beta_ent = 0.5 * (ln2pi + 1.0 + beta.var.ln());

    Ok(lik + prior + ent + beta_prior + beta_ent)
}

/// Exact ELBO for gaussian data with fixed scales.
pub fn elbo_fixed_scale_gaussian(
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<f64> {
    if data.kind() != LikelihoodKind::Gaussian {
        return Err(Error::Unsupported("gaussian ELBO on bernoulli data".into()));
    }
    elbo_fixed_scale(state, data, cfg)
}

fn converged(kind: LikelihoodKind, prev: f64, cur: f64, tol: f64) -> bool {
    let delta = (cur - prev).abs();
    match kind {
        LikelihoodKind::Bernoulli => delta <= tol && cur > AUC_GUARD,
        LikelihoodKind::Gaussian => delta < tol,
    }
}

/// Run sweeps from the seeded initial state until the stopping statistic
/// settles or `max_iters` is reached.
pub fn fit(data: &NetworkSeries, cfg: &ModelConfig) -> Result<FitResult> {
    let state = init_state(cfg, data)?;
    fit_from(state, data, cfg)
}

pub fn fit_from(
    mut state: VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.jacobi && cfg.family == Family::Mf {
        return Err(Error::Config(
            "jacobi mode applies to the smf family only".into(),
        ));
    }
    let tol = cfg.stop_tol_for(data.kind());
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut prev: Option<f64> = None;
    let mut done = false;
    for sweep_no in 1..=cfg.max_iters {
        let start = Instant::now();
        if let Err(e) = sweep(&mut state, data, cfg) {
            return Err(Error::Fit {
                sweep: sweep_no,
                source: Box::new(e),
                trace,
            });
        }
        let wall_time_s = start.elapsed().as_secs_f64();
        let statistic = stopping_statistic(&state, data);
        if !statistic.is_finite() {
            return Err(Error::Fit {
                sweep: sweep_no,
                source: Box::new(Error::Argument(format!(
                    "stopping statistic is {statistic}"
                ))),
                trace,
            });
        }
        let elbo = if cfg.scales.is_fixed() {
            elbo_fixed_scale(&state, data, cfg).ok()
        } else {
            None
        };
        trace.push(TraceRecord {
            sweep: sweep_no,
            statistic,
            elbo,
            wall_time_s,
        });
        if let Some(p) = prev {
            if converged(data.kind(), p, statistic, tol) {
                done = true;
                break;
            }
        }
        prev = Some(statistic);
    }
    let iterations = trace.len();
    Ok(FitResult {
        state,
        trace,
        converged: done,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianMoment, ScaleHyper};
    use nalgebra::{DMatrix, DVector};

    fn masked_gaussian(n: usize, t_len: usize) -> NetworkSeries {
        let len = n * n * t_len;
        NetworkSeries::new(
            LikelihoodKind::Gaussian,
            n,
            t_len,
            vec![0.0; len],
            Some(vec![false; len]),
            Some(0.5),
        )
        .unwrap()
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let data = masked_gaussian(3, 2);
        let cfg = ModelConfig {
            max_iters: 0,
            ..Default::default()
        };
        let res = fit(&data, &cfg).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(!res.converged);
        assert_eq!(res.state, init_state(&cfg, &data).unwrap());
    }

    #[test]
    fn prior_fixed_point_has_zero_elbo() {
        let data = masked_gaussian(3, 4);
        let cfg = ModelConfig {
            scales: ScaleMode::Fixed {
                sigma0: 0.7,
                tau: 0.3,
            },
            ..Default::default()
        };
        let mut st = init_state(&cfg, &data).unwrap();
        sweep_smf(&mut st, &data, &cfg).unwrap();
        // with no data the optimal q is the prior itself
        assert!(st.mean(0, 2).norm() < 1e-15);
        assert_eq!(st.beta.var, cfg.beta_prior.var);
        let elbo = elbo_fixed_scale_gaussian(&st, &data, &cfg).unwrap();
        assert!(elbo.abs() < 1e-10, "elbo = {elbo}");
    }

    #[test]
    fn prior_marginals_match_random_walk() {
        let data = masked_gaussian(2, 5);
        let cfg = ModelConfig {
            d: 1,
            scales: ScaleMode::Fixed {
                sigma0: 0.5,
                tau: 0.2,
            },
            ..Default::default()
        };
        let mut st = init_state(&cfg, &data).unwrap();
        sweep_smf(&mut st, &data, &cfg).unwrap();
        for t in 0..5 {
            let want = 0.25 + 0.04 * t as f64;
            assert!((st.marginal(0, t).cov[(0, 0)] - want).abs() < 1e-13);
        }
        for t in 0..4 {
            let want = 0.25 + 0.04 * t as f64;
            assert!((st.cross_cov(0, t)[(0, 0)] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn single_node_prior_shrinks_means() {
        let data = masked_gaussian(2, 3);
        let cfg = ModelConfig::default();
        let mut st = init_state(&cfg, &data).unwrap();
        for m in &mut st.marginals {
            *m = GaussianMoment {
                mean: DVector::from_element(2, 5.0),
                cov: DMatrix::identity(2, 2),
            };
        }
        sweep_smf(&mut st, &data, &cfg).unwrap();
        assert!(st.mean(0, 1).norm() < 1e-12);
    }

    #[test]
    fn adaptive_elbo_is_unsupported() {
        let data = masked_gaussian(2, 2);
        let cfg = ModelConfig {
            scales: ScaleMode::AdaptiveGlobal(ScaleHyper::default()),
            ..Default::default()
        };
        let st = init_state(&cfg, &data).unwrap();
        assert!(matches!(
            elbo_fixed_scale(&st, &data, &cfg),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn jacobi_with_mf_is_rejected() {
        let data = masked_gaussian(2, 2);
        let cfg = ModelConfig {
            family: Family::Mf,
            jacobi: true,
            ..Default::default()
        };
        assert!(fit(&data, &cfg).is_err());
    }
}
