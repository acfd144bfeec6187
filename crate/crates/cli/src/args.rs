use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Finite-sample bounds for transductive conformal inference.
#[derive(Debug, Parser)]
#[command(name = "conformal-urn", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conformal p-values of test scores against calibration scores.
    Pvalues(PvaluesArgs),
    /// DKW-type threshold lambda for the ecdf of m conformal p-values.
    Bound(BoundArgs),
    /// Calibrate an envelope template or a prediction level.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Synthetic prediction-interval experiment.
    #[command(subcommand)]
    Pi(RunCommand<PiArgs>),
    /// Synthetic novelty-detection experiment.
    #[command(subcommand)]
    Nd(RunCommand<NdArgs>),
    /// Exhaustive checks on small instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
pub enum RunCommand<T: Args> {
    /// Run the experiment.
    Run(T),
}

#[derive(Debug, Subcommand)]
pub enum CalibrateCommand {
    /// Monte-Carlo calibration of a linear or beta template.
    Template(TemplateArgs),
    /// Largest grid level whose band has FCP <= target with probability 1 - delta.
    Level(LevelArgs),
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Run every exact-equality check and print a table.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed.
    #[arg(long, env = "CONFORMAL_URN_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct PvaluesArgs {
    /// CSV with `score` and `role` (calibration|test) columns.
    #[arg(long, conflicts_with_all = ["calibration", "test"])]
    pub input: Option<PathBuf>,
    /// Calibration scores, one per line (optional `score` header).
    #[arg(long, requires = "test")]
    pub calibration: Option<PathBuf>,
    /// Test scores, one per line (optional `score` header).
    #[arg(long, requires = "calibration")]
    pub test: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundMode {
    Analytic,
    Full,
    Numerical,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = BoundMode::Analytic)]
    pub mode: BoundMode,
    /// Fixed-point iterations for the analytic threshold.
    #[arg(long, default_value_t = conformal_urn::bounds::DEFAULT_ITERATIONS)]
    pub iterations: u32,
    /// Monte-Carlo replicates (numerical mode).
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemplateChoice {
    Linear,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderChoice {
    /// `p_(k)`.
    Same,
    /// `p_(k+1)`.
    Next,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = TemplateChoice::Linear)]
    pub template: TemplateChoice,
    /// Comma-separated subset of 1..=m; all of it for linear, a log-spaced
    /// subset for beta when absent.
    #[arg(long, value_delimiter = ',')]
    pub k_set: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = OrderChoice::Same)]
    pub order: OrderChoice,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct LevelArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub delta: f64,
    /// Target false coverage proportion in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub target: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorChoice {
    Oracle,
    Naive,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PiAxis {
    /// Rows indexed by the nominal level alpha.
    Alpha,
    /// Rows indexed by an interval radius L, at level alpha_hat(L).
    Radius,
}

#[derive(Debug, Args)]
pub struct PiArgs {
    #[arg(long, default_value_t = 75)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub m: usize,
    #[arg(long, default_value_t = 5000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = PredictorChoice::Transfer)]
    pub predictor: PredictorChoice,
    /// Neighbours for the k-NN predictors.
    #[arg(long, default_value_t = 25)]
    pub neighbors: usize,
    #[arg(long, value_enum, default_value_t = PiAxis::Alpha)]
    pub axis: PiAxis,
    /// Comma-separated axis values; the calibration grid for alpha, or
    /// 0.05, 0.10, ..., 1.00 for radius, when absent.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Replicates for the coverage summary (0 skips it).
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Level at which marginal miscoverage is reported.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Writes PREFIX.csv and PREFIX.json; otherwise `--format` goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NdAxis {
    /// Rows indexed by the threshold t of R(t) = {p <= t}.
    T,
    /// Rows indexed by the BH level alpha.
    Alpha,
}

#[derive(Debug, Args)]
pub struct NdArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Null test points.
    #[arg(long, default_value_t = 500)]
    pub m0: usize,
    /// Novelties.
    #[arg(long, default_value_t = 260)]
    pub m1: usize,
    /// Mean shift of the novelty scores.
    #[arg(long, default_value_t = 3.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    /// BH level used in the coverage summary.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = NdAxis::T)]
    pub axis: NdAxis,
    /// Comma-separated axis values; the p-value grid for t, or
    /// 0.01, 0.02, ..., 0.50 for alpha, when absent.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Bound on n + m for permutation enumeration (at most 11).
    #[arg(long, default_value_t = conformal_urn::oracle::DEFAULT_LIMIT)]
    pub max_size: usize,
    /// Bound on n and m for interleaving enumeration (at most 12).
    #[arg(long, default_value_t = 6)]
    pub max_side: usize,
    /// Scale one reference probability to exercise the failure path.
    #[arg(long, hide = true)]
    pub perturb: bool,
}
