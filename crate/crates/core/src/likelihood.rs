//! Chain potentials for both likelihoods, the logistic tangent bound and the
//! intercept update.
//!
//! Likelihood sums run over observed unordered pairs: each symmetric
//! observation `Y_ijt = Y_jit` enters the fractional likelihood once.

use nalgebra::{DMatrix, DVector};

use crate::chain::ChainPotentials;
use crate::error::{Error, Result};
use crate::linalg::{quad_form, trace_product};
use crate::model::{
    BetaPosterior, CanonicalGaussian, LikelihoodKind, ModelConfig, NetworkSeries, VariationalState,
};

/// Tangent-bound coefficients `(A(xi), C(xi))` with
/// `A = -tanh(xi/2) / (4 xi)` and `C = xi/2 - log(1 + e^xi) + xi tanh(xi/2) / 4`.
///
/// Both are even in `xi`; `A(0) = -1/8`, `C(0) = -log 2`.
pub fn tangent_coeffs(xi: f64) -> (f64, f64) {
    let x = xi.abs();
    let a = tangent_a(x);
    // x/2 - log(1 + e^x) = -x/2 - log(1 + e^-x)
    let c = -0.5 * x - (-x).exp().ln_1p() - a * x * x;
    (a, c)
}

/// The quadratic coefficient `A(xi)` alone.
#[inline]
pub fn tangent_a(xi: f64) -> f64 {
    let x = xi.abs();
    if x < 1e-3 {
        let x2 = x * x;
        -(0.125 - x2 / 96.0 + x2 * x2 / 960.0)
    } else {
        -(0.5 * x).tanh() / (4.0 * x)
    }
}

/// Likelihood contribution to the canonical form of `q(x_it)`.
///
/// Adds `w (mu_j mu_j' + Sigma_j)` to `j` and the matching linear term to `h`
/// for every observed neighbour `j` of `i` at time `t`.
pub(crate) fn add_likelihood_terms(
    i: usize,
    t: usize,
    state: &VariationalState,
    data: &NetworkSeries,
    alpha: f64,
    j_acc: &mut DMatrix<f64>,
    h_acc: &mut DVector<f64>,
) {
    let mu_beta = state.beta.mean;
    let gaussian_prec = match data.kind() {
        LikelihoodKind::Gaussian => Some(alpha / data.noise_sd().map_or(1.0, |s| s * s)),
        LikelihoodKind::Bernoulli => None,
    };
    let jm = j_acc.as_mut_slice();
    let hm = h_acc.as_mut_slice();
    for (&j, &y) in data.neighbors(t, i).iter().zip(data.neighbor_values(t, i)) {
        let j = j as usize;
        let m = state.marginal(j, t);
        let (w, lin) = match gaussian_prec {
            Some(prec) => (prec, prec * (y - mu_beta)),
            None => {
                let a = tangent_a(state.xi(t, i, j));
                (-2.0 * alpha * a, alpha * (y - 0.5 + 2.0 * a * mu_beta))
            }
        };
        let mean = m.mean.as_slice();
        let cov = m.cov.as_slice();
        let d = mean.len();
        for c in 0..d {
            let wc = w * mean[c];
            for r in 0..d {
                jm[c * d + r] += wc * mean[r] + w * cov[c * d + r];
            }
            hm[c] += lin * mean[c];
        }
    }
}

/// Chain potentials of node `i` under the current state.
///
/// The random-walk prior adds `E[1/tau^2] I` to the unary precision once per
/// incident chain edge and `E[1/sigma0^2] I` at the first time point, so the
/// assembled chain precision is exactly block tridiagonal with coupling
/// `E[1/tau^2]`.
pub fn node_potentials(
    i: usize,
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> ChainPotentials {
    let (t_len, d) = (state.t_len, state.d);
    let inv_tau2 = state.tau_mean_inverse(i);
    let inv_sigma02 = state.sigma0_mean_inverse(i);
    let unary = (0..t_len)
        .map(|t| {
            let edges = usize::from(t > 0) + usize::from(t + 1 < t_len);
            let mut diag = inv_tau2 * edges as f64;
            if t == 0 {
                diag += inv_sigma02;
            }
            let mut j = DMatrix::from_diagonal_element(d, d, diag);
            let mut h = DVector::zeros(d);
            add_likelihood_terms(i, t, state, data, cfg.alpha, &mut j, &mut h);
            CanonicalGaussian { j, h }
        })
        .collect();
    ChainPotentials {
        unary,
        coupling: inv_tau2,
    }
}

pub fn potentials_gaussian(
    i: usize,
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<ChainPotentials> {
    if data.kind() != LikelihoodKind::Gaussian {
        return Err(Error::Unsupported(
            "gaussian potentials on bernoulli data".into(),
        ));
    }
    match data.noise_sd() {
        Some(s) if s > 0.0 => Ok(node_potentials(i, state, data, cfg)),
        other => Err(Error::Config(format!(
            "noise_sd must be positive, got {other:?}"
        ))),
    }
}

pub fn potentials_bernoulli(
    i: usize,
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<ChainPotentials> {
    if data.kind() != LikelihoodKind::Bernoulli {
        return Err(Error::Unsupported(
            "bernoulli potentials on gaussian data".into(),
        ));
    }
    let xi = state
        .xi
        .as_ref()
        .ok_or_else(|| Error::Shape("bernoulli state without tangent parameters".into()))?;
    if let Some(bad) = xi.iter().find(|&&x| x < 0.0 || x.is_nan()) {
        return Err(Error::Argument(format!("negative tangent parameter {bad}")));
    }
    Ok(node_potentials(i, state, data, cfg))
}

/// `E[(beta + x_i'x_j)^2]` under independent `q(beta) q(x_it) q(x_jt)`.
pub fn expected_square_logit(state: &VariationalState, t: usize, i: usize, j: usize) -> f64 {
    let (mi, mj) = (state.marginal(i, t), state.marginal(j, t));
    let inner = mi.mean.dot(&mj.mean);
    let quad_i = quad_form(&mj.cov, &mi.mean);
    let quad_j = quad_form(&mi.cov, &mj.mean);
    let tr = trace_product(&mi.cov, &mj.cov);
    let b = &state.beta;
    b.var + b.mean * b.mean + 2.0 * b.mean * inner + inner * inner + quad_i + quad_j + tr
}

/// Refresh the tangent parameters `xi_ijt = sqrt(E[(beta + x_it'x_jt)^2])`
/// in place for every observed pair; unobserved entries keep their value.
pub fn update_xi(state: &mut VariationalState, data: &NetworkSeries) {
    let n = state.n;
    let mut xi = state
        .xi
        .take()
        .unwrap_or_else(|| vec![1.0; state.t_len * n * n]);
    for (t, i, j) in data.observed_pairs() {
        let sq = expected_square_logit(state, t, i, j);
        debug_assert!(sq >= 0.0, "negative radicand {sq}");
        let v = sq.max(0.0).sqrt();
        xi[t * n * n + i * n + j] = v;
        xi[t * n * n + j * n + i] = v;
    }
    state.xi = Some(xi);
}

/// Gaussian update of `q(beta)` given the current node marginals.
pub fn update_beta(
    state: &VariationalState,
    data: &NetworkSeries,
    cfg: &ModelConfig,
) -> Result<BetaPosterior> {
    let prior = cfg.beta_prior;
    let alpha = cfg.alpha;
    let mut precision = 1.0 / prior.var;
    let mut shift = prior.mean / prior.var;
    match data.kind() {
        LikelihoodKind::Gaussian => {
            let s2 = data.noise_sd().map_or(1.0, |s| s * s);
            let mut count = 0usize;
            let mut resid = 0.0;
            for (t, i, j) in data.observed_pairs() {
                count += 1;
                resid += data.value(t, i, j) - state.mean(i, t).dot(state.mean(j, t));
            }
            precision += alpha * count as f64 / s2;
            shift += alpha * resid / s2;
        }
        LikelihoodKind::Bernoulli => {
            for (t, i, j) in data.observed_pairs() {
                let a = tangent_a(state.xi(t, i, j));
                let inner = state.mean(i, t).dot(state.mean(j, t));
                precision -= 2.0 * alpha * a;
                shift += alpha * (data.value(t, i, j) - 0.5 + 2.0 * a * inner);
            }
        }
    }
    if !precision.is_finite() || precision <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: "intercept posterior variance",
            node: None,
            time: None,
        });
    }
    let var = 1.0 / precision;
    Ok(BetaPosterior {
        mean: var * shift,
        var,
    })
}
