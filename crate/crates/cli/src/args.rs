use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_halfspace::NormSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "robust-halfspace", version, about = "Learn and certify adversarially robust halfspaces")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// Master seed; every random stream is derived from it
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print only machine-readable JSON on stdout
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the run record to this file
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    /// JSON file of flag values (or a previous run record); flags on the command line win
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted γ-margin dataset
    Gen(GenArgs),
    /// Robust ERM with the ellipsoid method
    TrainRerm(TrainRermArgs),
    /// Mirror descent under random classification noise
    TrainRcn(TrainRcnArgs),
    /// Robust risk, margin and clean errors of a model
    Eval(EvalArgs),
    /// Per-example certification as JSON lines
    Certify(CertifyArgs),
    /// Approximate separation from a robust-loss evaluator
    Reduce(ReduceArgs),
    /// Grid of RCN runs on planted streams, as CSV
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub gamma: f64,
    /// norm bound of the points (finite or `inf`)
    #[arg(long, default_value = "2")]
    pub p: NormSpec,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// keep only points with margin above gamma + slack
    #[arg(long, default_value_t = 0.0)]
    pub margin_slack: f64,
    /// plant an affine halfspace
    #[arg(long)]
    pub bias: bool,
    /// planted weights, comma separated (sampled when absent)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub w_star: Option<Vec<f64>>,
    /// output directory, or a path ending in .csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertModeArg {
    Auto,
    Ellipsoid,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainRermArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// adversary as inline JSON or a path to a JSON file
    #[arg(long)]
    pub adversary: String,
    /// precision bits b
    #[arg(long, default_value_t = 30)]
    pub bits: u32,
    /// required robust margin (default 2^-b times the data scale)
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub bias: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub cert_mode: CertModeArg,
    /// where to write the model JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateArg {
    Leaky,
    Glm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingArg {
    Uniform,
    Last,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RcnArgs {
    #[arg(long, value_enum, default_value = "leaky")]
    pub surrogate: SurrogateArg,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// norm bound of the points; the model lives in the dual ℓq ball
    #[arg(long, default_value = "2")]
    pub p: NormSpec,
    /// step budget (derived from the target accuracy when absent)
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    pub averaging: AveragingArg,
    #[arg(long)]
    pub step_size: Option<f64>,
    /// evaluation margin as a fraction of gamma
    #[arg(long, default_value_t = 0.5)]
    pub margin_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainRcnArgs {
    /// training CSV, sampled with replacement; omit to train on a planted stream
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// dimension of the planted stream
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub rcn: RcnArgs,
    /// holdout size drawn from the planted stream (stream mode only)
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// adversary for the robust risk (inline JSON or path)
    #[arg(long)]
    pub adversary: Option<String>,
    /// margin for the margin errors (default: the dataset's gamma)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// data norm for the normalized margins (default: the dataset's p, else 2)
    #[arg(long)]
    pub p: Option<NormSpec>,
    #[arg(long, default_value_t = 30)]
    pub bits: u32,
    #[arg(long, value_enum, default_value = "auto")]
    pub cert_mode: CertModeArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub adversary: String,
    #[arg(long, default_value_t = 30)]
    pub bits: u32,
    #[arg(long, value_enum, default_value = "auto")]
    pub cert_mode: CertModeArg,
    /// write JSON lines here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// re-verify the counterexamples of a previous certify output instead
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReduceArgs {
    /// center of the ℓp ball adversary, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// query point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<f64>,
    /// radius of the adversary ball
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value = "2")]
    pub p: NormSpec,
    /// approximation parameter
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// bound R with U(x) ⊆ B(0, R) (default ‖x‖₂ + ℓ2 radius of the ball)
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub bits: u32,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub etas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub ps: Vec<NormSpec>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "leaky")]
    pub surrogate: SurrogateArg,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub holdout: usize,
    #[arg(long, default_value_t = 0.5)]
    pub margin_fraction: f64,
    /// CSV output path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}
