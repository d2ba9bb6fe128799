use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "driftstream",
    version,
    about = "Drift-aware stream learning experiments on chronological CSV streams",
    args_override_self = true
)]
pub struct Cli {
    /// Output directory.
    #[arg(short = 'o', long, global = true, env = "DRIFTSTREAM_OUT", default_value = "driftstream-out")]
    pub out: PathBuf,

    /// Seed for synthetic streams.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// key=value file with defaults for any long flag; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Suppress the report on standard output.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prequential run of one configuration.
    Run(RunArgs),
    /// Write a synthetic drifting stream and its concept sidecar.
    Generate(GenerateArgs),
    /// Tune detector parameters on a stream prefix.
    Gridsearch(GridArgs),
    /// Detector x batch size x strategy matrix plus baseline rows.
    Matrix(MatrixArgs),
    /// Rolling mean of one numeric feature.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthProfile {
    PaperLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Class,
    Hours,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    None,
    PageHinkley,
    Adwin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriftKindArg {
    Sudden,
    Gradual,
    Recurring,
    None,
}

/// Where records come from and how to read them.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Chronological CSV stream.
    #[arg(long, conflicts_with = "synth")]
    pub input: Option<PathBuf>,

    /// Built-in synthetic stream instead of a file.
    #[arg(long, value_enum)]
    pub synth: Option<SynthProfile>,

    /// Categorical feature columns (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,

    /// Numeric feature columns (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub numeric: Vec<String>,

    #[arg(long, default_value = "label")]
    pub label: String,

    /// Label column holds class ids or throughput hours.
    #[arg(long, value_enum, default_value = "class")]
    pub target: TargetArg,

    /// Number of classes of a class target.
    #[arg(long, default_value_t = 3)]
    pub classes: u16,

    /// Hours binning: `tertile` or `days:E1,E2,...`.
    #[arg(long, default_value = "tertile")]
    pub bins: String,

    /// Features read but not fed to the model.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,

    /// Numeric features to Box-Cox transform.
    #[arg(long, value_delimiter = ',')]
    pub boxcox: Vec<String>,

    /// Truncate a categorical feature to a prefix, `feature=length`
    /// (repeatable).
    #[arg(long)]
    pub truncate: Vec<String>,

    #[arg(long, default_value_t = 0)]
    pub index_origin: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Page-Hinkley threshold.
    #[arg(long, default_value_t = 0.6)]
    pub lambda: f64,

    /// Page-Hinkley tolerated magnitude.
    #[arg(long, default_value_t = 0.005)]
    pub ph_delta: f64,

    #[arg(long, default_value_t = 30)]
    pub burn_in: u64,

    /// ADWIN confidence.
    #[arg(long, default_value_t = 0.001)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 2_000)]
    pub warmup: usize,

    /// Rolling accuracy window.
    #[arg(long, default_value_t = 1_000)]
    pub window: usize,

    /// Incremental update cadence.
    #[arg(long, default_value_t = 10)]
    pub mini_batch: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[arg(long, value_enum, default_value = "none")]
    pub detector: DetectorArg,

    #[command(flatten)]
    pub params: DetectorArgs,

    /// Data selection strategy; defaults to last when a detector is set.
    #[arg(long)]
    pub strategy: Option<String>,

    #[arg(long, default_value_t = 500)]
    pub batch_size: usize,

    #[arg(long)]
    pub incremental: bool,

    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "paper-like")]
    pub profile: SynthProfile,

    /// Number of instances.
    #[arg(long)]
    pub n: Option<u64>,

    #[arg(long)]
    pub drift_at: Option<u64>,

    #[arg(long, value_enum)]
    pub drift_kind: Option<DriftKindArg>,

    #[arg(long)]
    pub drift_width: Option<u64>,

    #[arg(long)]
    pub magnitude: Option<f64>,

    #[arg(long)]
    pub n_categorical: Option<usize>,

    #[arg(long)]
    pub n_numeric: Option<usize>,

    #[arg(long)]
    pub n_classes: Option<u16>,

    /// Omit the hidden-context column.
    #[arg(long)]
    pub no_hidden: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Instances the search runs on.
    #[arg(long, default_value_t = 10_000)]
    pub prefix: usize,

    #[arg(long, value_enum, default_value = "page-hinkley")]
    pub detector: DetectorArg,

    /// Page-Hinkley thresholds to try (comma separated).
    #[arg(long)]
    pub lambda: Option<String>,

    /// ADWIN confidences to try (comma separated).
    #[arg(long)]
    pub delta: Option<String>,

    #[arg(long, default_value_t = 0.005)]
    pub ph_delta: f64,

    #[arg(long, default_value_t = 30)]
    pub burn_in: u64,

    #[arg(long)]
    pub strategy: Option<String>,

    #[arg(long, default_value_t = 500)]
    pub batch_size: usize,

    #[arg(long)]
    pub incremental: bool,

    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[arg(long, value_delimiter = ',', default_value = "page-hinkley,adwin")]
    pub detectors: Vec<DetectorArg>,

    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,5000")]
    pub batch_sizes: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "last,mixed,next")]
    pub strategies: Vec<String>,

    #[command(flatten)]
    pub params: DetectorArgs,

    /// Run the cells without incremental updates.
    #[arg(long)]
    pub no_incremental: bool,

    /// Parallel cells; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,

    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[arg(long)]
    pub feature: String,

    #[arg(long, default_value_t = 1_000)]
    pub window: usize,
}
