//! Command-line front end: `train`, `predict`, `eval`, `cv`, `gridsearch`
//! and `synth`.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for input or
//! configuration errors.

pub mod args;
mod commands;
pub mod report;

use std::path::Path;

use hororf::hororf::{fit_forest_with_workers, with_workers, ForestModel, ForestParams};
use hororf::horosplit::SplitterMode;
use hororf::hypgeo::PoincarePoint;
use hororf::HoroError;
use thiserror::Error;

use crate::args::{Cli, Command, ForestArgs, SplitterArg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Compute(_) => 1,
            Self::Input(_) => 2,
        }
    }

    fn compute(e: HoroError) -> Self {
        Self::Compute(e.to_string())
    }
}

impl From<HoroError> for CliError {
    fn from(e: HoroError) -> Self {
        Self::Input(e.to_string())
    }
}

/// Shared state for one invocation.
pub struct Ctx {
    pub workers: Option<usize>,
}

impl Ctx {
    pub fn fit(
        &self,
        points: &[PoincarePoint],
        labels: &[usize],
        class_names: Vec<String>,
        params: &ForestParams,
    ) -> Result<ForestModel, CliError> {
        fit_forest_with_workers(points, labels, class_names, params, self.workers)
            .map_err(CliError::compute)
    }

    /// Hard votes and averaged leaf distributions.
    pub fn predict(
        &self,
        model: &ForestModel,
        points: &[PoincarePoint],
    ) -> Result<(Vec<usize>, Vec<Vec<f64>>), CliError> {
        let out = with_workers(self.workers, || {
            Ok::<_, HoroError>((model.predict_many(points)?, model.predict_proba_many(points)?))
        })?;
        Ok(out?)
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))
}

/// Reads `--config` (if any), applies flag overrides and validates.
pub fn forest_params(args: &ForestArgs) -> Result<ForestParams, CliError> {
    let mut p = match &args.config {
        Some(path) => serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => ForestParams::default(),
    };
    let tree = &mut p.tree_params;
    let split = &mut tree.splitter_config;
    if let Some(n) = args.trees {
        p.n_trees = n;
    }
    if let Some(m) = args.min_samples {
        tree.min_samples = m;
    }
    if let Some(d) = args.max_depth {
        tree.max_depth = Some(d);
    }
    if let Some(b) = args.beta {
        split.beta = b;
    }
    if args.no_hyperclasses {
        split.use_hyperclasses = false;
    }
    if args.no_class_balance {
        split.use_class_balance = false;
    }
    if let Some(s) = args.splitter {
        split.mode = match s {
            SplitterArg::Optimizer => SplitterMode::Optimizer,
            SplitterArg::AxisAligned => SplitterMode::AxisAlignedEnum,
            SplitterArg::Random => SplitterMode::RandomIdealFallback,
        };
    }
    if let Some(lo) = args.c_min {
        tree.c_exponent_range.0 = lo;
    }
    if let Some(hi) = args.c_max {
        tree.c_exponent_range.1 = hi;
    }
    if let Some(n) = args.max_iters {
        split.max_iters = n;
    }
    if let Some(n) = args.restarts {
        split.restarts = n;
    }
    if let Some(n) = args.fallback_ideals {
        split.n_fallback_ideals = n;
    }
    if args.no_bootstrap {
        p.bootstrap = false;
    }
    if let Some(s) = args.seed {
        p.seed = s;
    }
    p.validate()?;
    Ok(p)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers == Some(0) {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }
    let ctx = Ctx { workers: cli.workers };
    match cli.command {
        Command::Train(a) => commands::train(&ctx, &a),
        Command::Predict(a) => commands::predict(&ctx, &a),
        Command::Eval(a) => commands::eval(&ctx, &a),
        Command::Cv(a) => commands::cv(&ctx, &a),
        Command::Gridsearch(a) => commands::gridsearch(&ctx, &a),
        Command::Synth(a) => commands::synth(&a),
    }
}

pub use commands::{run_cv, run_gridsearch, CvProtocol};
