use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use dynlsm::io::{
    load_archive, read_edge_table, read_series, read_trajectory, save_archive, to_canonical_json,
    write_edge_table, write_series, write_trace, write_trajectory, EdgeRow, FitArchive,
};
use dynlsm::metrics::{auc, pcc, predict_edges, procrustes_align, rmse_inner_products, tp_ratio};
use dynlsm::simulate::{mask_edges, simulate_binary, simulate_gaussian};
use dynlsm::{
    fit, Error, Family, LikelihoodKind, ModelConfig, ScaleHyper, ScaleMode, Sigma0Posterior,
    TauPosterior,
};
use serde::Serialize;

use crate::{
    AlignArgs, Command, EvaluateArgs, ExportArgs, FamilyArg, FitArgs, Kind, PredictArgs, ScalesArg,
    SimulateArgs,
};

pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(Error::Io(e))
    }
}

type CliResult = Result<(), CliError>;

pub fn run(command: Command) -> CliResult {
    configure_threads()?;
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Align(a) => align(a),
        Command::Export(a) => export(a),
    }
}

fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var("DYNLSM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t >= 1).ok_or_else(|| {
        CliError::Usage(format!(
            "DYNLSM_THREADS: expected a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("DYNLSM_THREADS: {e}")))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    fs::create_dir_all(&a.out_dir)?;
    let (series, truth, probs) = match a.kind {
        Kind::Bernoulli => {
            let intercept = a.intercept.unwrap_or(1.0);
            let sim = simulate_binary(a.n, a.t_len, a.d, a.tau, a.rho, intercept, a.seed)?;
            (sim.series, sim.truth, Some(sim.probs))
        }
        Kind::Gaussian => {
            if a.rho != 0.0 {
                return Err(CliError::Usage(
                    "--rho applies to bernoulli simulations only".into(),
                ));
            }
            let intercept = a.intercept.unwrap_or(0.1);
            let sim = simulate_gaussian(a.n, a.t_len, a.d, a.tau, intercept, a.noise_sd, a.seed)?;
            (sim.series, sim.truth, None)
        }
    };
    let provenance = format!(
        "kind={},n={},T={},d={},tau={},rho={},seed={}",
        series.kind().as_str(),
        a.n,
        a.t_len,
        a.d,
        a.tau,
        a.rho,
        a.seed
    );
    let dir = &a.out_dir;
    write_trajectory(&dir.join("truth.csv"), &truth, Some(&provenance))?;
    if let Some(probs) = probs {
        let n = a.n;
        let rows: Vec<EdgeRow> = (0..a.t_len)
            .flat_map(|t| (0..n).flat_map(move |i| (i + 1..n).map(move |j| (t, i, j))))
            .map(|(t, i, j)| EdgeRow {
                t,
                i,
                j,
                value: probs[t * n * n + i * n + j],
            })
            .collect();
        write_edge_table(&dir.join("probs.csv"), "value", &rows, Some(&provenance))?;
    }
    match a.p_missing {
        Some(p) => {
            let (train, heldout) = mask_edges(&series, p, a.seed)?;
            write_series(&dir.join("series.csv"), &train, Some(a.seed))?;
            let rows: Vec<EdgeRow> = heldout
                .iter()
                .map(|e| EdgeRow {
                    t: e.t,
                    i: e.i,
                    j: e.j,
                    value: e.value,
                })
                .collect();
            let provenance = format!("{provenance},p_missing={p}");
            write_edge_table(&dir.join("heldout.csv"), "value", &rows, Some(&provenance))?;
        }
        None => write_series(&dir.join("series.csv"), &series, Some(a.seed))?,
    }
    Ok(())
}

fn build_config(a: &FitArgs) -> Result<ModelConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let bytes =
                fs::read(path).map_err(|e| Error::Schema(format!("{}: {e}", display(path))))?;
            serde_json::from_slice::<ModelConfig>(&bytes)
                .map_err(|e| Error::Schema(format!("{}: {e}", display(path))))?
        }
        None => ModelConfig::default(),
    };
    if let Some(f) = a.family {
        cfg.family = match f {
            FamilyArg::Smf => Family::Smf,
            FamilyArg::Mf => Family::Mf,
        };
    }
    if let Some(d) = a.d {
        cfg.d = d;
    }
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    if a.stop_tol.is_some() {
        cfg.stop_tol = a.stop_tol;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.jacobi |= a.jacobi;
    let hyper = match cfg.scales {
        ScaleMode::AdaptiveGlobal(h) | ScaleMode::AdaptiveNodewise(h) => h,
        ScaleMode::Fixed { .. } => ScaleHyper::default(),
    };
    match a.scales {
        Some(ScalesArg::Fixed) => match (a.sigma0, a.tau) {
            (Some(sigma0), Some(tau)) => cfg.scales = ScaleMode::Fixed { sigma0, tau },
            _ => {
                return Err(CliError::Usage(
                    "--scales fixed requires --sigma0 and --tau".into(),
                ))
            }
        },
        Some(ScalesArg::Global) => cfg.scales = ScaleMode::AdaptiveGlobal(hyper),
        Some(ScalesArg::Nodewise) => cfg.scales = ScaleMode::AdaptiveNodewise(hyper),
        None => {
            if let ScaleMode::Fixed { sigma0, tau } = &mut cfg.scales {
                *sigma0 = a.sigma0.unwrap_or(*sigma0);
                *tau = a.tau.unwrap_or(*tau);
            } else if a.sigma0.is_some() || a.tau.is_some() {
                return Err(CliError::Usage(
                    "--sigma0 and --tau require --scales fixed".into(),
                ));
            }
        }
    }
    if let Some(ScalesArg::Global | ScalesArg::Nodewise) = a.scales {
        if a.sigma0.is_some() || a.tau.is_some() {
            return Err(CliError::Usage(
                "--sigma0 and --tau require --scales fixed".into(),
            ));
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn fit_provenance(cfg: &ModelConfig) -> String {
    let family = match cfg.family {
        Family::Smf => "smf",
        Family::Mf => "mf",
    };
    let config = serde_json::to_string(cfg).unwrap_or_default();
    format!("family={family},seed={},config={config}", cfg.seed)
}

fn fit_cmd(a: FitArgs) -> CliResult {
    let cfg = build_config(&a)?;
    let (series, _) = read_series(&a.series, a.dense_zeros)?;
    let provenance = fit_provenance(&cfg);
    let res = match fit(&series, &cfg) {
        Ok(res) => res,
        Err(e) => {
            if let Error::Fit { trace, .. } = &e {
                write_trace(&a.trace, trace, Some(&provenance))?;
            }
            return Err(e.into());
        }
    };
    write_trace(&a.trace, &res.trace, Some(&provenance))?;
    save_archive(
        &a.out,
        &FitArchive::from_fit(&res, &cfg, &series, a.include_xi),
    )?;
    let last = res.trace.last().map_or(f64::NAN, |r| r.statistic);
    eprintln!(
        "dynlsm: {} sweeps, converged={}, final statistic {last:.6}",
        res.iterations, res.converged
    );
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let archive = load_archive(&a.fit)?;
    let state = archive.state()?;
    let pairs: Vec<(usize, usize, usize)> = match &a.pairs {
        Some(path) => read_edge_table(path, false)?
            .into_iter()
            .map(|r| (r.t, r.i, r.j))
            .collect(),
        None => (0..state.t_len)
            .flat_map(|t| (0..state.n).flat_map(move |i| (i + 1..state.n).map(move |j| (t, i, j))))
            .collect(),
    };
    let scores = predict_edges(&state, archive.kind, &pairs)?;
    let rows: Vec<EdgeRow> = pairs
        .iter()
        .zip(scores)
        .map(|(&(t, i, j), value)| EdgeRow { t, i, j, value })
        .collect();
    let provenance = format!("archive={},seed={}", display(&a.fit), archive.config.seed);
    write_edge_table(&a.out, "score", &rows, Some(&provenance))?;
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    scores: String,
    n_scores: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tp_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rmse_inner_products: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_seed: Option<u64>,
}

/// Values of `table` at the score rows, in score order.
fn matched(scores: &[EdgeRow], table: &Path) -> Result<Vec<f64>, CliError> {
    let rows = read_edge_table(table, true)?;
    let lookup: HashMap<(usize, usize, usize), f64> =
        rows.iter().map(|r| ((r.t, r.i, r.j), r.value)).collect();
    scores
        .iter()
        .map(|s| {
            lookup.get(&(s.t, s.i, s.j)).copied().ok_or_else(|| {
                CliError::Data(Error::Schema(format!(
                    "{}: no row for t={},i={},j={} listed in the scores",
                    display(table),
                    s.t + 1,
                    s.i + 1,
                    s.j + 1
                )))
            })
        })
        .collect()
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    if a.labels.is_none() && a.probs.is_none() && a.fit.is_none() {
        return Err(CliError::Usage(
            "evaluate needs at least one of --labels, --probs or --fit/--truth".into(),
        ));
    }
    let scores = read_edge_table(&a.scores, true)?;
    let values: Vec<f64> = scores.iter().map(|r| r.value).collect();
    let mut m = Metrics {
        scores: display(&a.scores),
        n_scores: scores.len(),
        pcc: None,
        auc: None,
        tp_ratio: None,
        rmse: None,
        rmse_inner_products: None,
        fit_seed: None,
    };
    if let Some(path) = &a.probs {
        m.pcc = Some(pcc(&values, &matched(&scores, path)?)?);
    }
    if let Some(path) = &a.labels {
        let labels = matched(&scores, path)?;
        if labels.iter().all(|&v| v == 0.0 || v == 1.0) {
            let flags: Vec<bool> = labels.iter().map(|&v| v == 1.0).collect();
            m.auc = Some(auc(&values, &flags)?);
            m.tp_ratio = Some(tp_ratio(&values, &flags)?);
        } else {
            let ss: f64 = values
                .iter()
                .zip(&labels)
                .map(|(s, y)| (s - y).powi(2))
                .sum();
            m.rmse = Some((ss / values.len() as f64).sqrt());
        }
    }
    if let (Some(fit_path), Some(truth_path)) = (&a.fit, &a.truth) {
        let archive = load_archive(fit_path)?;
        let est = archive.state()?.mean_trajectory();
        let truth = read_trajectory(truth_path)?;
        m.rmse_inner_products = Some(rmse_inner_products(&est, &truth)?);
        m.fit_seed = Some(archive.config.seed);
    }
    write_bytes(a.out.as_deref(), &to_canonical_json(&m)?)
}

fn align(a: AlignArgs) -> CliResult {
    let archive = load_archive(&a.fit)?;
    let (aligned, _) = procrustes_align(&archive.state()?.mean_trajectory())?;
    let provenance = format!("archive={},seed={}", display(&a.fit), archive.config.seed);
    write_trajectory(&a.out, &aligned, Some(&provenance))?;
    Ok(())
}

#[derive(Serialize)]
struct ScaleSummary {
    /// Posterior mean of the inverse variance, one entry per scale group.
    mean_inverse_variance: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    version: String,
    kind: &'static str,
    n: usize,
    #[serde(rename = "T")]
    t_len: usize,
    d: usize,
    config: ModelConfig,
    converged: bool,
    iterations: usize,
    final_statistic: Option<f64>,
    final_elbo: Option<f64>,
    intercept_mean: f64,
    intercept_var: f64,
    tau: ScaleSummary,
    sigma0: ScaleSummary,
}

fn export(a: ExportArgs) -> CliResult {
    let archive = load_archive(&a.fit)?;
    let last = archive.trace.last();
    let summary = Summary {
        version: archive.version.clone(),
        kind: match archive.kind {
            LikelihoodKind::Bernoulli => "bernoulli",
            LikelihoodKind::Gaussian => "gaussian",
        },
        n: archive.n,
        t_len: archive.t_len,
        d: archive.d,
        config: archive.config.clone(),
        converged: archive.converged,
        iterations: archive.iterations,
        final_statistic: last.map(|r| r.statistic),
        final_elbo: last.and_then(|r| r.elbo),
        intercept_mean: archive.beta.mean,
        intercept_var: archive.beta.var,
        tau: ScaleSummary {
            mean_inverse_variance: archive.tau.iter().map(TauPosterior::mean_inverse).collect(),
        },
        sigma0: ScaleSummary {
            mean_inverse_variance: archive
                .sigma0
                .iter()
                .map(Sigma0Posterior::mean_inverse)
                .collect(),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&summary).map_err(Error::Json)?;
    bytes.push(b'\n');
    write_bytes(a.out.as_deref(), &bytes)
}
