//! Python bindings: series, simulation, fitting, prediction and metrics.

use std::path::PathBuf;

use dynlsm::io::{load_archive, read_series, save_archive, write_series, FitArchive};
use dynlsm::metrics;
use dynlsm::simulate;
use dynlsm::{
    Error, Family, LikelihoodKind, ModelConfig as CoreConfig, NetworkSeries as CoreSeries,
    ScaleHyper, ScaleMode, VariationalState,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_kind(kind: &str) -> PyResult<LikelihoodKind> {
    kind.parse().map_err(to_py)
}

fn nested(traj: &[DMatrix<f64>]) -> Vec<Vec<Vec<f64>>> {
    traj.iter()
        .map(|x| {
            (0..x.nrows())
                .map(|i| x.row(i).iter().copied().collect())
                .collect()
        })
        .collect()
}

fn from_nested(traj: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<DMatrix<f64>>> {
    traj.into_iter()
        .map(|rows| {
            let n = rows.len();
            let d = rows.first().map_or(0, Vec::len);
            if n == 0 || d == 0 || rows.iter().any(|r| r.len() != d) {
                return Err(PyValueError::new_err(
                    "each time point must be a non-empty rectangular n x d list",
                ));
            }
            Ok(DMatrix::from_fn(n, d, |i, k| rows[i][k]))
        })
        .collect()
}

/// Observed network series. Indices are 0-based.
#[pyclass(module = "dynlsm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct NetworkSeries {
    inner: CoreSeries,
}

#[pymethods]
impl NetworkSeries {
    /// Build from `(t, i, j, value)` edges over unordered pairs. Pairs not
    /// listed are missing unless `dense_zeros` is set (bernoulli only).
    #[new]
    #[pyo3(signature = (kind, n, t_len, edges, noise_sd=None, dense_zeros=false))]
    fn new(
        kind: &str,
        n: usize,
        t_len: usize,
        edges: Vec<(usize, usize, usize, f64)>,
        noise_sd: Option<f64>,
        dense_zeros: bool,
    ) -> PyResult<Self> {
        let kind = parse_kind(kind)?;
        if dense_zeros && kind != LikelihoodKind::Bernoulli {
            return Err(PyValueError::new_err(
                "dense_zeros applies to bernoulli series only",
            ));
        }
        let len = t_len * n * n;
        let mut values = vec![0.0; len];
        let mut mask = vec![dense_zeros; len];
        for (t, i, j, v) in edges {
            if t >= t_len || i >= n || j >= n || i == j {
                return Err(PyValueError::new_err(format!(
                    "edge ({t}, {i}, {j}) outside n={n}, T={t_len}"
                )));
            }
            for k in [t * n * n + i * n + j, t * n * n + j * n + i] {
                values[k] = v;
                mask[k] = true;
            }
        }
        CoreSeries::new(kind, n, t_len, values, Some(mask), noise_sd)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (path, dense_zeros=false))]
    fn read(path: PathBuf, dense_zeros: bool) -> PyResult<Self> {
        read_series(&path, dense_zeros)
            .map(|(inner, _)| Self { inner })
            .map_err(to_py)
    }

    #[pyo3(signature = (path, seed=None))]
    fn write(&self, path: PathBuf, seed: Option<u64>) -> PyResult<()> {
        write_series(&path, &self.inner, seed).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter(T)]
    fn t_len(&self) -> usize {
        self.inner.t_len()
    }

    #[getter]
    fn n_observed_pairs(&self) -> usize {
        self.inner.n_observed_pairs()
    }

    /// Observed `(t, i, j, value)` with `i < j`.
    fn edges(&self) -> Vec<(usize, usize, usize, f64)> {
        self.inner
            .observed_pairs()
            .map(|(t, i, j)| (t, i, j, self.inner.value(t, i, j)))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkSeries(kind={}, n={}, T={}, observed_pairs={})",
            self.kind(),
            self.n(),
            self.t_len(),
            self.n_observed_pairs()
        )
    }
}

/// Model configuration. `scales` is `"global"`, `"nodewise"` or `"fixed"`;
/// fixed scales need `sigma0` and `tau`.
#[pyclass(module = "dynlsm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct ModelConfig {
    inner: CoreConfig,
}

#[pymethods]
impl ModelConfig {
    #[new]
    #[pyo3(signature = (
        d=2, alpha=0.95, family="smf", scales="global", sigma0=None, tau=None,
        max_iters=50, stop_tol=None, seed=0, jacobi=false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d: usize,
        alpha: f64,
        family: &str,
        scales: &str,
        sigma0: Option<f64>,
        tau: Option<f64>,
        max_iters: usize,
        stop_tol: Option<f64>,
        seed: u64,
        jacobi: bool,
    ) -> PyResult<Self> {
        let family: Family = family.parse().map_err(to_py)?;
        let scales = match (scales, sigma0, tau) {
            ("fixed", Some(sigma0), Some(tau)) => ScaleMode::Fixed { sigma0, tau },
            ("fixed", _, _) => {
                return Err(PyValueError::new_err("fixed scales need sigma0 and tau"))
            }
            (_, Some(_), _) | (_, _, Some(_)) => {
                return Err(PyValueError::new_err(
                    "sigma0 and tau apply to fixed scales only",
                ))
            }
            ("global", None, None) => ScaleMode::AdaptiveGlobal(ScaleHyper::default()),
            ("nodewise", None, None) => ScaleMode::AdaptiveNodewise(ScaleHyper::default()),
            (other, _, _) => {
                return Err(PyValueError::new_err(format!("unknown scales `{other}`")))
            }
        };
        let inner = CoreConfig {
            d,
            alpha,
            family,
            scales,
            max_iters,
            stop_tol,
            seed,
            jacobi,
            ..CoreConfig::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: CoreConfig =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("ModelConfig({})", self.to_json()?))
    }
}

/// A fitted variational posterior, from `fit` or a saved archive.
#[pyclass(module = "dynlsm_py", frozen)]
pub struct Fit {
    archive: FitArchive,
    state: VariationalState,
}

impl Fit {
    fn from_archive(archive: FitArchive) -> PyResult<Self> {
        let state = archive.state().map_err(to_py)?;
        Ok(Self { archive, state })
    }
}

#[pymethods]
impl Fit {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::from_archive(load_archive(&path).map_err(to_py)?)
    }

    /// Write the canonical JSON archive; `include_xi` keeps the tangent-bound
    /// parameters when the fit has them.
    #[pyo3(signature = (path, include_xi=false))]
    fn save(&self, path: PathBuf, include_xi: bool) -> PyResult<()> {
        let mut archive = self.archive.clone();
        if !include_xi {
            archive.xi = None;
        }
        save_archive(&path, &archive).map_err(to_py)
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.archive.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.archive.converged
    }

    /// `(sweep, statistic, elbo, wall_time_s)` per sweep.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64, Option<f64>, f64)> {
        self.archive
            .trace
            .iter()
            .map(|r| (r.sweep, r.statistic, r.elbo, r.wall_time_s))
            .collect()
    }

    /// Posterior mean and variance of the intercept.
    #[getter]
    fn intercept(&self) -> (f64, f64) {
        (self.state.beta.mean, self.state.beta.var)
    }

    #[getter]
    fn config(&self) -> ModelConfig {
        ModelConfig {
            inner: self.archive.config.clone(),
        }
    }

    /// Plug-in predictions at `(t, i, j)`: probabilities for bernoulli data,
    /// means for gaussian data.
    fn predict(&self, pairs: Vec<(usize, usize, usize)>) -> PyResult<Vec<f64>> {
        metrics::predict_edges(&self.state, self.archive.kind, &pairs).map_err(to_py)
    }

    /// Posterior means as `T` nested `n x d` lists.
    fn mean_trajectory(&self) -> Vec<Vec<Vec<f64>>> {
        nested(&self.state.mean_trajectory())
    }

    /// Procrustes-aligned posterior means.
    fn aligned_trajectory(&self) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let (aligned, _) =
            metrics::procrustes_align(&self.state.mean_trajectory()).map_err(to_py)?;
        Ok(nested(&aligned))
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(kind={}, n={}, T={}, d={}, iterations={}, converged={})",
            self.archive.kind.as_str(),
            self.archive.n,
            self.archive.t_len,
            self.archive.d,
            self.archive.iterations,
            self.archive.converged
        )
    }
}

#[pyfunction]
fn fit(py: Python<'_>, series: &NetworkSeries, config: &ModelConfig) -> PyResult<Fit> {
    let (data, cfg) = (&series.inner, &config.inner);
    let res = py.detach(|| dynlsm::fit(data, cfg)).map_err(to_py)?;
    Fit::from_archive(FitArchive::from_fit(&res, cfg, data, true))
}

/// Returns `(series, truth, probs)`; `probs[t][i][j]` are true edge
/// probabilities.
#[pyfunction]
#[pyo3(signature = (n, t_len, d=2, tau=0.1, rho=0.0, intercept=1.0, seed=0))]
#[allow(clippy::type_complexity)]
fn simulate_binary(
    n: usize,
    t_len: usize,
    d: usize,
    tau: f64,
    rho: f64,
    intercept: f64,
    seed: u64,
) -> PyResult<(NetworkSeries, Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    let sim = simulate::simulate_binary(n, t_len, d, tau, rho, intercept, seed).map_err(to_py)?;
    let probs = sim
        .probs
        .chunks(n * n)
        .map(|m| m.chunks(n).map(<[f64]>::to_vec).collect())
        .collect();
    Ok((
        NetworkSeries { inner: sim.series },
        nested(&sim.truth),
        probs,
    ))
}

/// Returns `(series, truth)`.
#[pyfunction]
#[pyo3(signature = (n, t_len, d=2, tau=0.1, intercept=0.1, noise_sd=0.1, seed=0))]
fn simulate_gaussian(
    n: usize,
    t_len: usize,
    d: usize,
    tau: f64,
    intercept: f64,
    noise_sd: f64,
    seed: u64,
) -> PyResult<(NetworkSeries, Vec<Vec<Vec<f64>>>)> {
    let sim =
        simulate::simulate_gaussian(n, t_len, d, tau, intercept, noise_sd, seed).map_err(to_py)?;
    Ok((NetworkSeries { inner: sim.series }, nested(&sim.truth)))
}

/// Hide observed pairs with probability `p`; returns the training series and
/// the hidden `(t, i, j, value)` edges.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn mask_edges(
    series: &NetworkSeries,
    p: f64,
    seed: u64,
) -> PyResult<(NetworkSeries, Vec<(usize, usize, usize, f64)>)> {
    let (train, heldout) = simulate::mask_edges(&series.inner, p, seed).map_err(to_py)?;
    Ok((
        NetworkSeries { inner: train },
        heldout.iter().map(|e| (e.t, e.i, e.j, e.value)).collect(),
    ))
}

#[pyfunction]
fn pcc(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    metrics::pcc(&xs, &ys).map_err(to_py)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    metrics::auc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn tp_ratio(preds: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    metrics::tp_ratio(&preds, &labels).map_err(to_py)
}

#[pyfunction]
fn rmse_inner_products(est: Vec<Vec<Vec<f64>>>, truth: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    metrics::rmse_inner_products(&from_nested(est)?, &from_nested(truth)?).map_err(to_py)
}

/// Returns `(aligned, rotations)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn procrustes_align(
    trajectory: Vec<Vec<Vec<f64>>>,
) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    let (aligned, rots) = metrics::procrustes_align(&from_nested(trajectory)?).map_err(to_py)?;
    Ok((nested(&aligned), nested(&rots)))
}

#[pymodule]
fn dynlsm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<NetworkSeries>()?;
    m.add_class::<ModelConfig>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_binary, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(mask_edges, m)?)?;
    m.add_function(wrap_pyfunction!(pcc, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(tp_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(rmse_inner_products, m)?)?;
    m.add_function(wrap_pyfunction!(procrustes_align, m)?)?;
    Ok(())
}
