//! Synthetic dynamic networks and edge hold-out.
//!
//! Draw order within one call: initial positions node-major, then transition
//! increments node-major (coordinate-major inside a node), then edge labels or
//! noise time-major over unordered pairs `i < j`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{LikelihoodKind, NetworkSeries};
use crate::rng::{self, Stream};

/// Centre of the two initial mixture components along the first axis.
pub const MIXTURE_OFFSET: f64 = 1.5;
/// Standard deviation of each initial mixture component.
pub const MIXTURE_SD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct BinarySimulation {
    pub series: NetworkSeries,
    /// True positions, one `n x d` matrix per time point.
    pub truth: Vec<DMatrix<f64>>,
    /// Edge probabilities in the `T x n x n` layout of the series.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussianSimulation {
    pub series: NetworkSeries,
    pub truth: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldoutEdge {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_dims(n: usize, t_len: usize, d: usize) -> Result<()> {
    if n < 2 || t_len < 1 || d < 1 {
        return Err(Error::Argument(format!(
            "need n >= 2, T >= 1, d >= 1; got n={n}, T={t_len}, d={d}"
        )));
    }
    Ok(())
}

/// Add random-walk increments to the initial positions in `truth[0]`.
///
/// For each node and coordinate the `T - 1` increments are jointly normal
/// with covariance `tau^2 ((1 - rho) I + rho 1 1')`, drawn as
/// `tau (sqrt(1 - rho) z_s + sqrt(rho) z_0)`.
fn propagate(truth: &mut [DMatrix<f64>], tau: f64, rho: f64, rng: &mut ChaCha20Rng) {
    let (n, d) = truth[0].shape();
    let t_len = truth.len();
    let (own, shared) = ((1.0 - rho).sqrt(), rho.sqrt());
    let mut eps = vec![0.0; t_len.saturating_sub(1)];
    for i in 0..n {
        for k in 0..d {
            let common = normal(rng);
            for e in eps.iter_mut() {
                *e = tau * (own * normal(rng) + shared * common);
            }
            for t in 1..t_len {
                truth[t][(i, k)] = truth[t - 1][(i, k)] + eps[t - 1];
            }
        }
    }
}

fn inner(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    x.row(i).dot(&x.row(j))
}

/// Binary network with two-component initial mixture and AR-correlated
/// transitions. Edge probabilities are `1 / (1 + exp(-(intercept + x_i'x_j)))`.
pub fn simulate_binary(
    n: usize,
    t_len: usize,
    d: usize,
    tau: f64,
    rho: f64,
    intercept: f64,
    seed: u64,
) -> Result<BinarySimulation> {
    check_dims(n, t_len, d)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Argument(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) || !intercept.is_finite() {
        return Err(Error::Argument(format!(
            "tau must be finite and non-negative, intercept finite; got tau={tau}, intercept={intercept}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Simulate);
    let mut truth = vec![DMatrix::zeros(n, d); t_len];
    for i in 0..n {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for k in 0..d {
            let centre = if k == 0 { sign * MIXTURE_OFFSET } else { 0.0 };
            truth[0][(i, k)] = centre + MIXTURE_SD * normal(&mut rng);
        }
    }
    propagate(&mut truth, tau, rho, &mut rng);

    let mut probs = vec![0.0; t_len * n * n];
    let mut values = vec![0.0; t_len * n * n];
    for (t, x) in truth.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let p = 1.0 / (1.0 + (-(intercept + inner(x, i, j))).exp());
                let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                for (a, b) in [(i, j), (j, i)] {
                    probs[t * n * n + a * n + b] = p;
                    values[t * n * n + a * n + b] = y;
                }
            }
        }
    }
    let series = NetworkSeries::new(LikelihoodKind::Bernoulli, n, t_len, values, None, None)?;
    Ok(BinarySimulation {
        series,
        truth,
        probs,
    })
}

/// Weighted network `Y_ijt ~ N(intercept + x_i'x_j, noise_sd^2)` with
/// `x_i1 ~ N(0, tau^2 I)` and i.i.d. `N(0, tau^2)` increments.
pub fn simulate_gaussian(
    n: usize,
    t_len: usize,
    d: usize,
    tau: f64,
    intercept: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<GaussianSimulation> {
    check_dims(n, t_len, d)?;
    if !(tau >= 0.0 && tau.is_finite() && noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::Argument(format!(
            "tau must be non-negative and noise_sd positive; got tau={tau}, noise_sd={noise_sd}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Simulate);
    let mut truth = vec![DMatrix::zeros(n, d); t_len];
    for i in 0..n {
        for k in 0..d {
            truth[0][(i, k)] = tau * normal(&mut rng);
        }
    }
    propagate(&mut truth, tau, 0.0, &mut rng);

    let mut values = vec![0.0; t_len * n * n];
    for (t, x) in truth.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let y = intercept + inner(x, i, j) + noise_sd * normal(&mut rng);
                values[t * n * n + i * n + j] = y;
                values[t * n * n + j * n + i] = y;
            }
        }
    }
    let series = NetworkSeries::new(
        LikelihoodKind::Gaussian,
        n,
        t_len,
        values,
        None,
        Some(noise_sd),
    )?;
    Ok(GaussianSimulation { series, truth })
}

/// Hide each observed unordered pair independently with probability `p`.
///
/// One uniform draw is consumed per unordered pair (time-major) whether or
/// not the pair was observed, so the hold-out pattern depends only on the
/// seed and the dimensions. Hidden values are zeroed in the training series.
pub fn mask_edges(
    series: &NetworkSeries,
    p_missing: f64,
    seed: u64,
) -> Result<(NetworkSeries, Vec<HeldoutEdge>)> {
    if !(0.0..1.0).contains(&p_missing) {
        return Err(Error::Argument(format!(
            "missing probability must lie in [0, 1), got {p_missing}"
        )));
    }
    let (n, t_len) = (series.n(), series.t_len());
    let mut rng = rng::stream(seed, Stream::Mask);
    let mut values = series.values().to_vec();
    let mut mask = series.mask().to_vec();
    let mut heldout = Vec::new();
    for t in 0..t_len {
        for i in 0..n {
            for j in i + 1..n {
                let u: f64 = rng.random();
                if u < p_missing && series.is_observed(t, i, j) {
                    heldout.push(HeldoutEdge {
                        t,
                        i,
                        j,
                        value: series.value(t, i, j),
                    });
                    for k in [series.index(t, i, j), series.index(t, j, i)] {
                        mask[k] = false;
                        values[k] = 0.0;
                    }
                }
            }
        }
    }
    let train = NetworkSeries::new(
        series.kind(),
        n,
        t_len,
        values,
        Some(mask),
        series.noise_sd(),
    )?;
    Ok((train, heldout))
}

/// Restore held-out entries into a training series.
pub fn unmask(train: &NetworkSeries, heldout: &[HeldoutEdge]) -> Result<NetworkSeries> {
    let mut values = train.values().to_vec();
    let mut mask = train.mask().to_vec();
    for e in heldout {
        if e.i >= train.n() || e.j >= train.n() || e.t >= train.t_len() || e.i == e.j {
            return Err(Error::Argument(format!(
                "held-out edge ({}, {}, {}) outside the series",
                e.t, e.i, e.j
            )));
        }
        for k in [train.index(e.t, e.i, e.j), train.index(e.t, e.j, e.i)] {
            mask[k] = true;
            values[k] = e.value;
        }
    }
    NetworkSeries::new(
        train.kind(),
        train.n(),
        train.t_len(),
        values,
        Some(mask),
        train.noise_sd(),
    )
}
