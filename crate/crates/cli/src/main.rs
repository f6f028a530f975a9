//! `charshrink`: precision matrix estimation with a penalized characteristic,
//! discriminant analysis, simulation studies and numerical checks.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use charshrink::{SolverConfig, TauRule};

#[derive(Debug, Parser)]
#[command(name = "charshrink", version, about = "Precision matrix estimation by shrinking an affine characteristic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem from CSV inputs.
    Estimate(EstimateArgs),
    /// Discriminant analysis: fit, predict, screen.
    #[command(subcommand)]
    Lda(LdaCommand),
    /// Replicated comparison study on synthetic data.
    Simulate(SimulateArgs),
    /// Optimality certificates and empirical checks.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Initial ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Linearization constant; must exceed φ₁(AᵀA)·φ₁(BBᵀ). Computed when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_abs: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rel: f64,
    /// Rebalance ρ every 10 iterations from the residual ratio.
    #[arg(long)]
    pub adaptive_rho: bool,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            tau: self.tau.map_or(TauRule::Auto, TauRule::Fixed),
            max_iters: self.max_iters,
            eps_abs: self.tol_abs,
            eps_rel: self.tol_rel,
            adaptive_rho: self.adaptive_rho,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Sample covariance S (p×p CSV).
    #[arg(long)]
    pub cov: PathBuf,
    /// Left factor A (a×p CSV).
    #[arg(long = "A")]
    pub a: PathBuf,
    /// Right factor B (p×b CSV).
    #[arg(long = "B")]
    pub b: PathBuf,
    /// Offset C (a×b CSV); zero when omitted.
    #[arg(long = "C")]
    pub c: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write one row per iteration to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum LdaCommand {
    /// Fit a discriminant model at a fixed λ or by K-fold cross-validation.
    Fit(LdaFitArgs),
    /// Predict labels for new observations.
    Predict(LdaPredictArgs),
    /// Keep the variables with the largest one-way ANOVA F statistics.
    Screen(LdaScreenArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV with feature columns followed by an integer label column (1..J).
    #[arg(long)]
    pub data: PathBuf,
    /// The first CSV row holds column names.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("penalty").required(true).args(["lambda", "cv"])))]
pub struct LdaFitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub cv: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub grid_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LdaPredictArgs {
    /// model.json written by `lda fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of feature rows.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// The last column of --data holds true labels; report the error rate.
    #[arg(long)]
    pub labeled: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LdaScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of variables to keep.
    #[arg(long)]
    pub top: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Data-generating model: 1 or 2.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub p: usize,
    /// Class counts, comma separated.
    #[arg(long = "J", value_delimiter = ',', required = true)]
    pub classes: Vec<usize>,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Comma separated subset of proposed, glasso, lw, bayes.
    #[arg(long, value_delimiter = ',', default_value = "proposed,glasso,lw,bayes")]
    pub methods: Vec<String>,
    /// Training, validation and test sizes; 25J, 200, 1000 when omitted.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    pub grid_len: usize,
    /// Worker threads for replications.
    #[arg(long, env = "CHARSHRINK_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Stationarity residual of a given Ω.
    Kkt(KktArgs),
    /// Error of the estimator against the truth as the sample size grows.
    Rate(RateArgs),
    /// Lower bound on the compatibility constant for a support.
    Xi(XiArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct KktArgs {
    #[arg(long)]
    pub cov: PathBuf,
    #[arg(long = "A")]
    pub a: PathBuf,
    #[arg(long = "B")]
    pub b: PathBuf,
    #[arg(long = "C")]
    pub c: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    /// Candidate Ω (p×p CSV).
    #[arg(long)]
    pub omega: PathBuf,
    /// Entries of AΩB − C at most this large in magnitude count as zero.
    #[arg(long, default_value_t = 0.0)]
    pub zero_tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RateArgs {
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// λ_n = K·√(log p / n).
    #[arg(long, default_value_t = 0.02)]
    pub k_const: f64,
    /// Covariance of model 1 or 2 (with two classes) as the truth.
    #[arg(long, default_value = "1")]
    pub model: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, env = "CHARSHRINK_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct XiArgs {
    #[arg(long = "A")]
    pub a: PathBuf,
    #[arg(long = "B")]
    pub b: PathBuf,
    /// CSV of 1-based `row,column` cells of AMB.
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Estimate(args) => commands::estimate(args),
        Command::Lda(LdaCommand::Fit(args)) => commands::lda_fit(args),
        Command::Lda(LdaCommand::Predict(args)) => commands::lda_predict(args),
        Command::Lda(LdaCommand::Screen(args)) => commands::lda_screen(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Verify(VerifyCommand::Kkt(args)) => commands::verify_kkt(args),
        Command::Verify(VerifyCommand::Rate(args)) => commands::verify_rate(args),
        Command::Verify(VerifyCommand::Xi(args)) => commands::verify_xi(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.chain().any(|c| c.downcast_ref::<charshrink::Error>().is_some_and(charshrink::Error::is_numerical));
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}
