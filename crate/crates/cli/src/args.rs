use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shotgun::matrix_io::Format;
use shotgun::objective::Loss;
use shotgun::solver_par::Mode;
use shotgun::solver_seq::Variant;

#[derive(Debug, Parser)]
#[command(
    name = "shotgun",
    version,
    about = "Sequential and parallel coordinate descent for the Lasso and sparse logistic regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem, optionally along a warm-started lambda path.
    Solve(SolveArgs),
    /// Estimate the spectral radius of AᵀA and the parallelism limit P*.
    Pstar(PstarArgs),
    /// Measure iterations to reach 0.5% of the optimum for several P.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Svmlight,
    MatrixMarket,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Lasso,
    Logistic,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Lasso => Loss::Squared,
            LossArg::Logistic => Loss::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Fixed,
    Cdn,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Fixed => Variant::Fixed,
            VariantArg::Cdn => Variant::Cdn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Sync,
    Async,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sync => Mode::Sync,
            ModeArg::Async => Mode::Async,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Dataset file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Svmlight)]
    pub format: FormatArg,
    /// One label per line; required with `--format matrix-market`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// svmlight only: feature count (defaults to the largest index seen).
    #[arg(long)]
    pub num_features: Option<usize>,
}

impl InputArgs {
    pub fn format(&self) -> Result<Format> {
        Ok(match self.format {
            FormatArg::Svmlight => Format::Svmlight {
                num_features: self.num_features,
            },
            FormatArg::MatrixMarket => match &self.labels {
                Some(labels) => Format::MatrixMarket {
                    labels: labels.clone(),
                },
                None => bail!("--format matrix-market needs --labels"),
            },
            FormatArg::Csv => Format::DenseCsv,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Lasso)]
    pub loss: LossArg,
    /// L1 penalty on the column-normalized problem.
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Parallel updates per round (worker threads in async mode).
    #[arg(long, default_value_t = 1, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Fixed)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
    pub mode: ModeArg,
    /// Stop when no step in an epoch exceeds this.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_epochs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale parallel steps by 1/P.
    #[arg(long)]
    pub damping: bool,
    /// Divergence guard: fire when F exceeds this multiple of max(F0, best F).
    #[arg(long, default_value_t = 10.0)]
    pub guard_blowup: f64,
    /// Divergence guard: check every this many epochs.
    #[arg(long, default_value_t = 1)]
    pub guard_every: u64,
    /// Stop as soon as the objective is at or below this value.
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Geometric lambda values from lambda_max down to --lambda (1 = solve directly).
    #[arg(long, default_value_t = 10, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub path_steps: usize,
    /// Trace one row every this many epochs.
    #[arg(long, default_value_t = 1)]
    pub trace_every: u64,
    /// Report weights of the normalized columns instead of the original ones.
    #[arg(long)]
    pub normalized_weights: bool,
    /// Output directory for result.json and trace.csv (default: result to stdout).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PstarArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Relative change of the Rayleigh quotient that stops the iteration.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated parallel update counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p_list: Vec<usize>,
    /// Seeds per P.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Fixed)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: u64,
    /// Relative gap to the reference optimum that counts as reached.
    #[arg(long, default_value_t = 0.005)]
    pub threshold: f64,
    /// Also time one asynchronous run per P.
    #[arg(long)]
    pub async_wall: bool,
    #[arg(long, default_value_t = 10.0)]
    pub guard_blowup: f64,
    #[arg(long, default_value_t = 1)]
    pub guard_every: u64,
    /// Output directory for bench.csv and bench.json (default: JSON to stdout).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
