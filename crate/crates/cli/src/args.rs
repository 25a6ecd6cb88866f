use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hororf", version, about = "Horospherical random forests in the Poincaré ball")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "HORORF_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a forest and write the model file.
    Train(TrainArgs),
    /// Predict labels (and optionally probabilities) for a CSV of points.
    Predict(PredictArgs),
    /// Score a model on a labelled CSV.
    Eval(EvalArgs),
    /// Repeated stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Grid search over the class-balance beta and the stopping size m.
    Gridsearch(GridArgs),
    /// Generate a synthetic hierarchical dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitterArg {
    Optimizer,
    AxisAligned,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    MicroF1,
    MacroF1,
    Aupr,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// m in {1, 3, 5}
    Small,
    /// m in {3, 7, 11}
    Large,
}

/// Forest parameters. A `--config` file is read first and the flags
/// override it.
#[derive(Debug, Clone, Default, Args)]
pub struct ForestArgs {
    /// JSON file with forest parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Nodes with at most this many samples become leaves (m).
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Class-balance beta in [0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub no_hyperclasses: bool,
    #[arg(long)]
    pub no_class_balance: bool,
    #[arg(long, value_enum)]
    pub splitter: Option<SplitterArg>,
    /// Smallest exponent n of the per-node C = 2^n.
    #[arg(long, allow_hyphen_values = true)]
    pub c_min: Option<i32>,
    /// Largest exponent n of the per-node C = 2^n.
    #[arg(long, allow_hyphen_values = true)]
    pub c_max: Option<i32>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Random ideal points tried when the optimizer fails.
    #[arg(long)]
    pub fallback_ideals: Option<usize>,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Where to write the training summary; printed when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of points; a trailing label column is ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; printed when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Add one averaged-probability column per class.
    #[arg(long)]
    pub proba: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: Metric,
    /// Positive class for binary AUPR; defaults to the rarer class.
    #[arg(long)]
    pub positive_class: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Positive class for binary AUPR; defaults to the rarer class.
    #[arg(long)]
    pub positive_class: Option<String>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Report JSON; printed when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// One JSON line per fold.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Score every cell on this split instead of cross-validating.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.9,0.99,0.999,0.9999")]
    pub betas: Vec<f64>,
    /// Stopping sizes; overrides the preset.
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "small")]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "micro-f1")]
    pub metric: Metric,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// One JSON line per grid cell.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON document with the generator fields.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
