use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "dynlsm",
    version,
    about = "Dynamic latent space network models by variational inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a network series and write series, truth and hold-out files.
    Simulate(SimulateArgs),
    /// Fit a series and write a fit archive and a trace.
    Fit(FitArgs),
    /// Score pairs from a fit archive.
    Predict(PredictArgs),
    /// Compute metrics from scores against labels, probabilities or a truth trajectory.
    Evaluate(EvaluateArgs),
    /// Write the Procrustes-aligned mean trajectory of a fit.
    Align(AlignArgs),
    /// Write a human-readable summary of a fit archive.
    Export(ExportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Bernoulli,
    Gaussian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FamilyArg {
    Smf,
    Mf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScalesArg {
    Fixed,
    Global,
    Nodewise,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long = "T")]
    t_len: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Increment correlation (bernoulli only).
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Defaults to 1 for bernoulli and 0.1 for gaussian data.
    #[arg(long, allow_hyphen_values = true)]
    intercept: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hide each pair with this probability and write it to heldout.csv.
    #[arg(long)]
    p_missing: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    series: PathBuf,
    /// Treat bernoulli pairs absent from the series file as observed zeros.
    #[arg(long)]
    dense_zeros: bool,
    /// JSON model configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    scales: Option<ScalesArg>,
    /// Initial standard deviation for `--scales fixed`.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Transition standard deviation for `--scales fixed`.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Update node chains in parallel from the previous sweep (smf only).
    #[arg(long)]
    jacobi: bool,
    /// Store the tangent-bound parameters in the archive.
    #[arg(long)]
    include_xi: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    /// `t,i,j[,...]` table of pairs; all pairs at all times when omitted.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// `t,i,j,score` table.
    #[arg(long)]
    scores: PathBuf,
    /// `t,i,j,value` observed values: auc and tp_ratio for 0/1 labels, rmse otherwise.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// `t,i,j,value` true edge probabilities or means, for pcc.
    #[arg(long)]
    probs: Option<PathBuf>,
    /// Fit archive whose inner products are compared with `--truth`.
    #[arg(long, requires = "truth")]
    fit: Option<PathBuf>,
    /// True trajectory `t,i,x1..xd`.
    #[arg(long, requires = "fit")]
    truth: Option<PathBuf>,
    /// Metrics JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Summary JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynlsm: error: {e}");
            ExitCode::from(e.code())
        }
    }
}
