//! Machine-readable result records shared by the subcommands.

use std::collections::BTreeMap;

use hororf::datasets::{accuracy, aupr, macro_f1, micro_f1};
use hororf::hororf::{ForestModel, ForestParams};
use hororf::hypgeo::PoincarePoint;
use serde::Serialize;

use crate::{CliError, Ctx};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Positive-class AUPR for binary tasks, otherwise the mean one-vs-rest
    /// AUPR over classes present on both sides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aupr: Option<f64>,
}

impl Scores {
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "accuracy" => Some(self.accuracy),
            "micro_f1" => Some(self.micro_f1),
            "macro_f1" => Some(self.macro_f1),
            "aupr" => self.aupr,
            _ => None,
        }
    }
}

pub const METRICS: [&str; 4] = ["accuracy", "micro_f1", "macro_f1", "aupr"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// One-vs-rest AUPR of `class`, or `None` when the labels are one-sided.
pub fn class_aupr(probs: &[Vec<f64>], labels: &[usize], class: usize) -> Option<f64> {
    let y: Vec<bool> = labels.iter().map(|&l| l == class).collect();
    if y.iter().all(|&v| v) || !y.iter().any(|&v| v) {
        return None;
    }
    let s: Vec<f64> = probs.iter().map(|p| p[class]).collect();
    aupr(&y, &s).ok()
}

/// The class scored by binary AUPR: the named one, or the rarer class
/// (lower id on ties). `None` for multi-class data without a name.
pub fn positive_class(
    name: Option<&str>,
    class_names: &[String],
    labels: &[usize],
) -> Result<Option<usize>, CliError> {
    if let Some(name) = name {
        return class_names
            .iter()
            .position(|c| c == name)
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("unknown positive class `{name}`")));
    }
    if class_names.len() != 2 {
        return Ok(None);
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok(Some(usize::from(ones < labels.len() - ones)))
}

pub fn score(
    ctx: &Ctx,
    model: &ForestModel,
    points: &[PoincarePoint],
    labels: &[usize],
    positive: Option<usize>,
) -> Result<Scores, CliError> {
    let (pred, probs) = ctx.predict(model, points)?;
    let aupr = match positive {
        Some(c) => class_aupr(&probs, labels, c),
        None => {
            let per: Vec<f64> = (0..model.n_classes())
                .filter_map(|c| class_aupr(&probs, labels, c))
                .collect();
            (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
        }
    };
    Ok(Scores {
        accuracy: accuracy(labels, &pred)?,
        micro_f1: micro_f1(labels, &pred)?,
        macro_f1: macro_f1(labels, &pred)?,
        aupr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Spread {
    pub fn of(values: impl IntoIterator<Item = usize>) -> Self {
        let v: Vec<f64> = values.into_iter().map(|x| x as f64).collect();
        Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub dataset: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_trees: usize,
    pub training_accuracy: f64,
    pub depth: Spread,
    pub leaves: Spread,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositiveAupr {
    pub class: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub micro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    /// One-vs-rest AUPR per class; `null` where the data is one-sided.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aupr: Option<BTreeMap<String, Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aupr_positive: Option<PositiveAupr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvEntry {
    pub trial: usize,
    pub fold: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub dataset: String,
    pub n_samples: usize,
    pub n_folds: usize,
    pub n_trials: usize,
    pub params: ForestParams,
    pub entries: Vec<CvEntry>,
    /// Per metric: mean and std across trials of the per-trial fold means.
    pub summary: BTreeMap<String, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub beta: f64,
    pub min_samples: usize,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Scores>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridBest {
    pub beta: f64,
    pub min_samples: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub metric: String,
    pub betas: Vec<f64>,
    pub ms: Vec<usize>,
    pub rows: Vec<GridRow>,
    pub best: GridBest,
}

/// The highest-scoring row; ties go to the smaller beta, then smaller m.
pub fn best_row(rows: &[GridRow]) -> Option<&GridRow> {
    rows.iter().min_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.beta.total_cmp(&b.beta))
            .then(a.min_samples.cmp(&b.min_samples))
    })
}

pub fn cv_table(report: &CvReport) -> String {
    let mut out = format!(
        "{} trials x {} folds on {} ({} samples)\n",
        report.n_trials, report.n_folds, report.dataset, report.n_samples
    );
    for (name, ms) in &report.summary {
        out.push_str(&format!("{name:>10}  {:.4} ± {:.4}\n", ms.mean, ms.std));
    }
    out
}

pub fn grid_table(report: &GridReport) -> String {
    let mut out = format!("{:>8} {:>4} {:>8} {:>8}\n", "beta", "m", report.metric, "std");
    for r in &report.rows {
        let std = r.std.map_or("-".to_string(), |s| format!("{s:.4}"));
        out.push_str(&format!("{:>8} {:>4} {:>8.4} {std:>8}\n", r.beta, r.min_samples, r.score));
    }
    out.push_str(&format!(
        "best: beta = {}, m = {} ({:.4})\n",
        report.best.beta, report.best.min_samples, report.best.score
    ));
    out
}
