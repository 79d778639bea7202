//! Shared domain types: observed network series, model configuration,
//! Gaussian factors and the variational state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Initial spread of the variational means and covariances.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodKind {
    Gaussian,
    Bernoulli,
}

impl LikelihoodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LikelihoodKind::Gaussian => "gaussian",
            LikelihoodKind::Bernoulli => "bernoulli",
        }
    }
}

impl std::str::FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(LikelihoodKind::Gaussian),
            "bernoulli" => Ok(LikelihoodKind::Bernoulli),
            other => Err(Error::Argument(format!(
                "unknown likelihood kind `{other}`"
            ))),
        }
    }
}

/// A symmetric `T x n x n` network series with an observation mask.
///
/// Entry `(t, i, j)` is stored at `t * n * n + i * n + j`. Diagonal entries are
/// stored but never read. Observed neighbour lists are built once at
/// validation so that likelihood sums only touch observed pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSeries {
    kind: LikelihoodKind,
    n: usize,
    t_len: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    noise_sd: Option<f64>,
    neighbors: Vec<Vec<u32>>,
    neighbor_values: Vec<Vec<f64>>,
}

impl NetworkSeries {
    /// Validate raw data and build a series.
    ///
    /// `mask = None` marks every off-diagonal entry as observed. Only observed
    /// off-diagonal entries are checked for symmetry, finiteness and domain.
    /// The diagonal is never observed; unobserved values are stored as zero.
    pub fn new(
        kind: LikelihoodKind,
        n: usize,
        t_len: usize,
        values: Vec<f64>,
        mask: Option<Vec<bool>>,
        noise_sd: Option<f64>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 nodes, got {n}")));
        }
        if t_len < 1 {
            return Err(Error::Shape("need at least one time point".into()));
        }
        let len = t_len * n * n;
        if values.len() != len {
            return Err(Error::Shape(format!(
                "values has {} entries, expected T*n*n = {len}",
                values.len()
            )));
        }
        let mask = match mask {
            Some(m) if m.len() != len => {
                return Err(Error::Shape(format!(
                    "mask has {} entries, expected {len}",
                    m.len()
                )))
            }
            Some(m) => m,
            None => vec![true; len],
        };
        let mut mask = mask;
        let mut values = values;
        for t in 0..t_len {
            for i in 0..n {
                mask[t * n * n + i * n + i] = false;
            }
        }
        let noise_sd = match kind {
            LikelihoodKind::Gaussian => match noise_sd {
                Some(s) if s > 0.0 && s.is_finite() => Some(s),
                Some(s) => {
                    return Err(Error::Config(format!("noise_sd must be positive, got {s}")))
                }
                None => return Err(Error::Config("gaussian series requires noise_sd".into())),
            },
            LikelihoodKind::Bernoulli => None,
        };

        let mut neighbors = vec![Vec::new(); t_len * n];
        for t in 0..t_len {
            for i in 0..n {
                for j in (i + 1)..n {
                    let a = t * n * n + i * n + j;
                    let b = t * n * n + j * n + i;
                    if mask[a] != mask[b] {
                        return Err(Error::AsymmetricMask { t, i, j });
                    }
                    if !mask[a] {
                        continue;
                    }
                    let (va, vb) = (values[a], values[b]);
                    if !va.is_finite() {
                        return Err(Error::NonFinite { t, i, j });
                    }
                    if !vb.is_finite() {
                        return Err(Error::NonFinite { t, i: j, j: i });
                    }
                    if va != vb {
                        return Err(Error::Asymmetric {
                            t,
                            i,
                            j,
                            a: va,
                            b: vb,
                        });
                    }
                    if kind == LikelihoodKind::Bernoulli && va != 0.0 && va != 1.0 {
                        return Err(Error::Domain {
                            kind: "bernoulli",
                            t,
                            i,
                            j,
                            value: va,
                        });
                    }
                    neighbors[t * n + i].push(j as u32);
                    neighbors[t * n + j].push(i as u32);
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
        let neighbor_values = neighbors
            .iter()
            .enumerate()
            .map(|(k, list)| {
                let (t, i) = (k / n, k % n);
                list.iter()
                    .map(|&j| values[t * n * n + i * n + j as usize])
                    .collect()
            })
            .collect();

        Ok(Self {
            kind,
            n,
            t_len,
            values,
            mask,
            noise_sd,
            neighbors,
            neighbor_values,
        })
    }

    pub fn kind(&self) -> LikelihoodKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn noise_sd(&self) -> Option<f64> {
        self.noise_sd
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn index(&self, t: usize, i: usize, j: usize) -> usize {
        t * self.n * self.n + i * self.n + j
    }

    #[inline]
    pub fn value(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(t, i, j)]
    }

    #[inline]
    pub fn is_observed(&self, t: usize, i: usize, j: usize) -> bool {
        i != j && self.mask[self.index(t, i, j)]
    }

    /// Observed neighbours of node `i` at time `t`, in increasing order.
    #[inline]
    pub fn neighbors(&self, t: usize, i: usize) -> &[u32] {
        &self.neighbors[t * self.n + i]
    }

    /// Values on the edges listed by [`Self::neighbors`], in the same order.
    #[inline]
    pub fn neighbor_values(&self, t: usize, i: usize) -> &[f64] {
        &self.neighbor_values[t * self.n + i]
    }

    /// Observed unordered pairs `(t, i, j)` with `i < j`, time-major.
    pub fn observed_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.t_len).flat_map(move |t| {
            (0..self.n).flat_map(move |i| {
                self.neighbors(t, i)
                    .iter()
                    .map(|&j| j as usize)
                    .filter(move |&j| j > i)
                    .map(move |j| (t, i, j))
            })
        })
    }

    pub fn n_observed_pairs(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Re-validate an existing series from its raw parts.
pub fn validate_series(series: &NetworkSeries) -> Result<NetworkSeries> {
    NetworkSeries::new(
        series.kind,
        series.n,
        series.t_len,
        series.values.clone(),
        Some(series.mask.clone()),
        series.noise_sd,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Smf,
    Mf,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smf" => Ok(Family::Smf),
            "mf" => Ok(Family::Mf),
            other => Err(Error::Argument(format!("unknown family `{other}`"))),
        }
    }
}

/// Hyperparameters of the inverse-gamma prior on the initial variance and
/// the gamma prior on the transition variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleHyper {
    pub a_sigma0: f64,
    pub b_sigma0: f64,
    pub c_tau: f64,
    pub d_tau: f64,
}

impl Default for ScaleHyper {
    fn default() -> Self {
        Self {
            a_sigma0: 0.5,
            b_sigma0: 0.5,
            c_tau: 1.0,
            d_tau: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScaleMode {
    /// Known initial and transition standard deviations.
    Fixed {
        sigma0: f64,
        tau: f64,
    },
    AdaptiveGlobal(ScaleHyper),
    AdaptiveNodewise(ScaleHyper),
}

impl ScaleMode {
    pub fn is_fixed(&self) -> bool {
        matches!(self, ScaleMode::Fixed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    pub alpha: f64,
    pub family: Family,
    pub scales: ScaleMode,
    pub beta_prior: BetaPrior,
    pub max_iters: usize,
    /// Stopping tolerance; `None` picks 0.01 (training AUC) for bernoulli
    /// data and 1e-3 (training RMSE) for gaussian data.
    pub stop_tol: Option<f64>,
    pub seed: u64,
    /// Update all node chains from the previous sweep's snapshot in parallel.
    #[serde(default)]
    pub jacobi: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 2,
            alpha: 0.95,
            family: Family::Smf,
            scales: ScaleMode::AdaptiveGlobal(ScaleHyper::default()),
            beta_prior: BetaPrior {
                mean: 0.0,
                var: 10.0,
            },
            max_iters: 50,
            stop_tol: None,
            seed: 0,
            jacobi: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::Config(
                "latent dimension d must be at least 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match self.scales {
            ScaleMode::Fixed { sigma0, tau } => {
                positive("sigma0", sigma0)?;
                positive("tau", tau)?;
            }
            ScaleMode::AdaptiveGlobal(h) | ScaleMode::AdaptiveNodewise(h) => {
                positive("a_sigma0", h.a_sigma0)?;
                positive("b_sigma0", h.b_sigma0)?;
                positive("c_tau", h.c_tau)?;
                positive("d_tau", h.d_tau)?;
            }
        }
        positive("beta prior variance", self.beta_prior.var)?;
        if !self.beta_prior.mean.is_finite() {
            return Err(Error::Config("beta prior mean must be finite".into()));
        }
        if let Some(tol) = self.stop_tol {
            positive("stop_tol", tol)?;
        }
        Ok(())
    }

    pub fn stop_tol_for(&self, kind: LikelihoodKind) -> f64 {
        self.stop_tol.unwrap_or(match kind {
            LikelihoodKind::Bernoulli => 0.01,
            LikelihoodKind::Gaussian => 1e-3,
        })
    }
}

/// Gaussian factor `exp(-x'Jx/2 + h'x)`; `J` may be indefinite for messages.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalGaussian {
    pub j: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl CanonicalGaussian {
    pub fn zeros(d: usize) -> Self {
        Self {
            j: DMatrix::zeros(d, d),
            h: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// Moment form; fails unless `J` is positive definite.
    pub fn to_moment(&self) -> Result<GaussianMoment> {
        if !self.j.iter().chain(self.h.iter()).all(|v| v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                context: "non-finite canonical form",
                node: None,
                time: None,
            });
        }
        let chol = self
            .j
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                context: "canonical to moment conversion",
                node: None,
                time: None,
            })?;
        let mean = chol.solve(&self.h);
        let cov = crate::linalg::symmetrize(chol.inverse());
        Ok(GaussianMoment { mean, cov })
    }
}

impl std::ops::Add<&CanonicalGaussian> for &CanonicalGaussian {
    type Output = CanonicalGaussian;

    fn add(self, rhs: &CanonicalGaussian) -> CanonicalGaussian {
        CanonicalGaussian {
            j: &self.j + &rhs.j,
            h: &self.h + &rhs.h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoment {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMoment {
    /// `E[x x'] = mu mu' + Sigma`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.mean * self.mean.transpose() + &self.cov
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub mean: f64,
    pub var: f64,
}

/// Generalized inverse Gaussian with density `x^(p-1) exp(-(a x + b / x) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    /// Cached `E[1/X]`.
    pub mean_inverse: f64,
}

/// Inverse gamma with density `x^(-shape-1) exp(-rate / x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgParams {
    pub shape: f64,
    pub rate: f64,
    /// Cached `E[1/X] = shape / rate`.
    pub mean_inverse: f64,
}

impl IgParams {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self {
            shape,
            rate,
            mean_inverse: shape / rate,
        }
    }
}

/// Posterior for a transition variance `tau^2`: either a point value (fixed
/// scales, and the adaptive starting point) or a GIG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TauPosterior {
    Fixed { variance: f64 },
    Gig(GigParams),
}

impl TauPosterior {
    pub fn mean_inverse(&self) -> f64 {
        match self {
            TauPosterior::Fixed { variance } => 1.0 / variance,
            TauPosterior::Gig(g) => g.mean_inverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma0Posterior {
    Fixed { variance: f64 },
    InverseGamma(IgParams),
}

impl Sigma0Posterior {
    pub fn mean_inverse(&self) -> f64 {
        match self {
            Sigma0Posterior::Fixed { variance } => 1.0 / variance,
            Sigma0Posterior::InverseGamma(g) => g.mean_inverse,
        }
    }
}

/// Full variational approximation.
///
/// Node marginals are indexed `i * T + t`, pairwise cross-covariances
/// `Cov(x_it, x_i(t+1))` are indexed `i * (T - 1) + t` and stay zero under
/// the mean-field family. `tau`/`sigma0` hold one entry (global) or `n`
/// entries (node-wise). `xi` is a dense symmetric `T x n x n` tensor for
/// bernoulli data.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub n: usize,
    pub t_len: usize,
    pub d: usize,
    pub marginals: Vec<GaussianMoment>,
    pub cross: Vec<DMatrix<f64>>,
    pub beta: BetaPosterior,
    pub tau: Vec<TauPosterior>,
    pub sigma0: Vec<Sigma0Posterior>,
    pub xi: Option<Vec<f64>>,
}

impl VariationalState {
    #[inline]
    pub fn marginal(&self, i: usize, t: usize) -> &GaussianMoment {
        &self.marginals[i * self.t_len + t]
    }

    #[inline]
    pub fn mean(&self, i: usize, t: usize) -> &DVector<f64> {
        &self.marginals[i * self.t_len + t].mean
    }

    #[inline]
    pub fn cross_cov(&self, i: usize, t: usize) -> &DMatrix<f64> {
        &self.cross[i * (self.t_len - 1) + t]
    }

    pub fn tau_mean_inverse(&self, i: usize) -> f64 {
        self.tau[if self.tau.len() == 1 { 0 } else { i }].mean_inverse()
    }

    pub fn sigma0_mean_inverse(&self, i: usize) -> f64 {
        self.sigma0[if self.sigma0.len() == 1 { 0 } else { i }].mean_inverse()
    }

    #[inline]
    pub fn xi(&self, t: usize, i: usize, j: usize) -> f64 {
        match &self.xi {
            Some(xi) => xi[t * self.n * self.n + i * self.n + j],
            None => 0.0,
        }
    }

    /// Latent mean matrices, one `n x d` matrix per time point.
    pub fn mean_trajectory(&self) -> Vec<DMatrix<f64>> {
        (0..self.t_len)
            .map(|t| DMatrix::from_fn(self.n, self.d, |i, k| self.mean(i, t)[k]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sweep: usize,
    /// Training AUC (bernoulli) or training RMSE (gaussian) after the sweep.
    pub statistic: f64,
    pub elbo: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: VariationalState,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
}

/// Deterministic starting point: means i.i.d. `N(0, 0.01 I)`, covariances
/// `0.01 I`, the intercept at zero with its prior variance, scales at their
/// fixed values or prior-implied moments, and `xi = 1`.
pub fn init_state(cfg: &ModelConfig, data: &NetworkSeries) -> Result<VariationalState> {
    cfg.validate()?;
    let (n, t_len, d) = (data.n(), data.t_len(), cfg.d);
    let mut rng = rng::stream(cfg.seed, Stream::Init);
    let sd = INIT_SCALE.sqrt();

    let mut marginals = Vec::with_capacity(n * t_len);
    for _ in 0..n * t_len {
        let mean = DVector::from_fn(d, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        marginals.push(GaussianMoment {
            mean,
            cov: DMatrix::identity(d, d) * INIT_SCALE,
        });
    }
    let cross = vec![DMatrix::zeros(d, d); n * t_len.saturating_sub(1)];

    let (tau, sigma0) = match cfg.scales {
        ScaleMode::Fixed { sigma0, tau } => (
            vec![TauPosterior::Fixed {
                variance: tau * tau,
            }],
            vec![Sigma0Posterior::Fixed {
                variance: sigma0 * sigma0,
            }],
        ),
        ScaleMode::AdaptiveGlobal(h) | ScaleMode::AdaptiveNodewise(h) => {
            let copies = if matches!(cfg.scales, ScaleMode::AdaptiveGlobal(_)) {
                1
            } else {
                n
            };
            // gamma prior mean of tau^2, and E[1/sigma0^2] = a/b under the
            // inverse-gamma prior
            let tau0 = TauPosterior::Fixed {
                variance: h.c_tau / h.d_tau,
            };
            let sigma00 = Sigma0Posterior::Fixed {
                variance: h.b_sigma0 / h.a_sigma0,
            };
            (vec![tau0; copies], vec![sigma00; copies])
        }
    };

    let xi = match data.kind() {
        LikelihoodKind::Bernoulli => Some(vec![1.0; t_len * n * n]),
        LikelihoodKind::Gaussian => None,
    };

    Ok(VariationalState {
        n,
        t_len,
        d,
        marginals,
        cross,
        beta: BetaPosterior {
            mean: 0.0,
            var: cfg.beta_prior.var,
        },
        tau,
        sigma0,
        xi,
    })
}
