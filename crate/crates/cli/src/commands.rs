use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hororf::datasets::{
    generate_synthetic_tree, load_csv, load_unlabeled_csv, save_csv, stratified_kfold, Dataset,
    SyntheticTreeSpec,
};
use hororf::hororf::{ForestModel, ForestParams};
use serde::Serialize;

use crate::args::{CvArgs, EvalArgs, GridArgs, Metric, PredictArgs, Preset, SynthArgs, TrainArgs};
use crate::report::{
    best_row, class_aupr, cv_table, grid_table, mean_std, positive_class, score, CvEntry,
    CvReport, EvalReport, GridBest, GridReport, GridRow, PositiveAupr, Spread, TrainSummary,
    METRICS,
};
use crate::{forest_params, read_file, write_file, CliError, Ctx};

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("reports serialize") + "\n")
        .collect()
}

/// Writes `json` to `path`, or prints it. With a path, `table` goes to
/// stdout.
fn emit(path: Option<&Path>, json: &str, table: Option<String>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            write_file(p, json)?;
            if let Some(t) = table {
                print!("{t}");
            }
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<ForestModel, CliError> {
    ForestModel::from_json(&read_file(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Relabels `data` with the model's class ids.
fn align_labels(data: &Dataset, model: &ForestModel) -> Result<Vec<usize>, CliError> {
    if data.dim() != model.dim {
        return Err(CliError::Input(format!(
            "data has dimension {}, model expects {}",
            data.dim(),
            model.dim
        )));
    }
    let map = data
        .class_names
        .iter()
        .map(|name| {
            model.class_names.iter().position(|c| c == name).ok_or_else(|| {
                CliError::Input(format!("class `{name}` in the data is unknown to the model"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(data.labels.iter().map(|&l| map[l]).collect())
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let params = forest_params(&a.forest)?;
    let data = load_csv(&a.data)?;
    let start = Instant::now();
    let model = ctx.fit(&data.points, &data.labels, data.class_names.clone(), &params)?;
    let wall_time_secs = start.elapsed().as_secs_f64();
    write_file(&a.model, &model.to_json())?;

    let (pred, _) = ctx.predict(&model, &data.points)?;
    let correct = pred.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    let summary = TrainSummary {
        dataset: data.name.clone(),
        n_samples: data.len(),
        n_classes: data.n_classes(),
        n_trees: model.trees.len(),
        training_accuracy: correct as f64 / data.len() as f64,
        depth: Spread::of(model.trees.iter().map(|t| t.root.depth())),
        leaves: Spread::of(model.trees.iter().map(|t| t.root.n_leaves())),
        wall_time_secs,
    };
    emit(a.summary.as_deref(), &to_json(&summary), None)
}

pub fn predict(ctx: &Ctx, a: &PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let points = load_unlabeled_csv(&a.data)?;
    if let Some(p) = points.first().filter(|p| p.dim() != model.dim) {
        return Err(CliError::Input(format!(
            "data has dimension {}, model expects {}",
            p.dim(),
            model.dim
        )));
    }
    let (pred, probs) = ctx.predict(&model, &points)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    if a.proba {
        header.extend(model.class_names.iter().map(|c| format!("p_{c}")));
    }
    let write_err = |e: csv::Error| CliError::Compute(e.to_string());
    wtr.write_record(&header).map_err(write_err)?;
    for (p, pr) in pred.iter().zip(&probs) {
        let mut row = vec![model.class_names[*p].clone()];
        if a.proba {
            row.extend(pr.iter().map(|v| v.to_string()));
        }
        wtr.write_record(&row).map_err(write_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::Compute(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    emit(a.output.as_deref(), &text, None)
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let data = load_csv(&a.data)?;
    let labels = align_labels(&data, &model)?;
    let want = |m: Metric| a.metric == m || a.metric == Metric::All;
    let positive = positive_class(a.positive_class.as_deref(), &model.class_names, &labels)?;

    let s = score(ctx, &model, &data.points, &labels, positive)?;
    let mut report = EvalReport {
        n_samples: data.len(),
        micro_f1: want(Metric::MicroF1).then_some(s.micro_f1),
        macro_f1: want(Metric::MacroF1).then_some(s.macro_f1),
        aupr: None,
        aupr_positive: None,
    };
    if want(Metric::Aupr) {
        let (_, probs) = ctx.predict(&model, &data.points)?;
        let per_class: BTreeMap<String, Option<f64>> = model
            .class_names
            .iter()
            .enumerate()
            .map(|(c, name)| (name.clone(), class_aupr(&probs, &labels, c)))
            .collect();
        report.aupr = Some(per_class);
        report.aupr_positive = positive.map(|c| PositiveAupr {
            class: model.class_names[c].clone(),
            value: class_aupr(&probs, &labels, c),
        });
    }
    emit(a.output.as_deref(), &to_json(&report), None)
}

/// Cross-validation settings resolved against a dataset.
#[derive(Debug, Clone)]
pub struct CvProtocol {
    pub folds: usize,
    pub trials: usize,
    pub positive: Option<usize>,
}

/// `trials` rounds of stratified k-fold. Trial `t` uses `params.seed + t`
/// both for the fold plan and for the forests.
pub fn run_cv(
    ctx: &Ctx,
    data: &Dataset,
    params: &ForestParams,
    protocol: &CvProtocol,
) -> Result<CvReport, CliError> {
    if protocol.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let mut entries = Vec::with_capacity(protocol.trials * protocol.folds);
    for trial in 0..protocol.trials {
        let seed = params.seed.wrapping_add(trial as u64);
        let plan = stratified_kfold(&data.labels, protocol.folds, seed)?;
        for fold in 0..protocol.folds {
            let (train_idx, test_idx) = plan.split(fold);
            if train_idx.is_empty() || test_idx.is_empty() {
                return Err(CliError::Input(format!(
                    "{} samples cannot fill {} folds",
                    data.len(),
                    protocol.folds
                )));
            }
            let train = data.subset(&train_idx);
            let test = data.subset(&test_idx);
            let p = ForestParams { seed, ..params.clone() };
            let model = ctx.fit(&train.points, &train.labels, data.class_names.clone(), &p)?;
            entries.push(CvEntry {
                trial,
                fold,
                seed,
                n_train: train.len(),
                n_test: test.len(),
                scores: score(ctx, &model, &test.points, &test.labels, protocol.positive)?,
            });
        }
    }

    let mut summary = BTreeMap::new();
    for metric in METRICS {
        let per_trial: Vec<f64> = (0..protocol.trials)
            .filter_map(|t| {
                let v: Vec<f64> = entries
                    .iter()
                    .filter(|e| e.trial == t)
                    .filter_map(|e| e.scores.get(metric))
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        if !per_trial.is_empty() {
            summary.insert(metric.to_string(), mean_std(&per_trial));
        }
    }
    Ok(CvReport {
        dataset: data.name.clone(),
        n_samples: data.len(),
        n_folds: protocol.folds,
        n_trials: protocol.trials,
        params: params.clone(),
        entries,
        summary,
    })
}

fn protocol_for(
    data: &Dataset,
    folds: usize,
    trials: usize,
    positive: Option<&str>,
) -> Result<CvProtocol, CliError> {
    Ok(CvProtocol {
        folds,
        trials,
        positive: positive_class(positive, &data.class_names, &data.labels)?,
    })
}

pub fn cv(ctx: &Ctx, a: &CvArgs) -> Result<(), CliError> {
    let params = forest_params(&a.forest)?;
    let data = load_csv(&a.data)?;
    let pr = &a.protocol;
    let protocol = protocol_for(&data, pr.folds, pr.trials, pr.positive_class.as_deref())?;
    let report = run_cv(ctx, &data, &params, &protocol)?;
    if let Some(p) = &a.jsonl {
        write_file(p, &to_jsonl(&report.entries))?;
    }
    emit(a.output.as_deref(), &to_json(&report), Some(cv_table(&report)))
}

fn metric_key(m: Metric) -> Result<&'static str, CliError> {
    match m {
        Metric::MicroF1 => Ok("micro_f1"),
        Metric::MacroF1 => Ok("macro_f1"),
        Metric::Aupr => Ok("aupr"),
        Metric::All => Err(CliError::Input("grid search needs a single --metric".into())),
    }
}

/// Scores every `(beta, m)` cell by cross-validation on `data`, or on
/// `validation` when given, and picks the best.
pub fn run_gridsearch(
    ctx: &Ctx,
    data: &Dataset,
    validation: Option<&Dataset>,
    base: &ForestParams,
    betas: &[f64],
    ms: &[usize],
    metric: &str,
    protocol: &CvProtocol,
) -> Result<GridReport, CliError> {
    if betas.is_empty() || ms.is_empty() {
        return Err(CliError::Input("grids must be non-empty".into()));
    }
    let mut cells = Vec::new();
    for &beta in betas {
        for &m in ms {
            let mut p = base.clone();
            p.tree_params.splitter_config.beta = beta;
            p.tree_params.min_samples = m;
            p.validate()?;
            cells.push((beta, m, p));
        }
    }

    let missing = || CliError::Compute(format!("metric {metric} is undefined on this data"));
    let mut rows = Vec::with_capacity(cells.len());
    for (beta, min_samples, p) in cells {
        let row = match validation {
            None => {
                let report = run_cv(ctx, data, &p, protocol)?;
                let ms = *report.summary.get(metric).ok_or_else(missing)?;
                GridRow {
                    beta,
                    min_samples,
                    score: ms.mean,
                    std: Some(ms.std),
                    cv: Some(report),
                    validation: None,
                }
            }
            Some(val) => {
                let model = ctx.fit(&data.points, &data.labels, data.class_names.clone(), &p)?;
                let labels = align_labels(val, &model)?;
                let s = score(ctx, &model, &val.points, &labels, protocol.positive)?;
                GridRow {
                    beta,
                    min_samples,
                    score: s.get(metric).ok_or_else(missing)?,
                    std: None,
                    cv: None,
                    validation: Some(s),
                }
            }
        };
        rows.push(row);
    }
    let best = best_row(&rows).expect("grid is non-empty");
    let best = GridBest {
        beta: best.beta,
        min_samples: best.min_samples,
        score: best.score,
    };
    Ok(GridReport {
        metric: metric.to_string(),
        betas: betas.to_vec(),
        ms: ms.to_vec(),
        rows,
        best,
    })
}

pub fn gridsearch(ctx: &Ctx, a: &GridArgs) -> Result<(), CliError> {
    let base = forest_params(&a.forest)?;
    let metric = metric_key(a.metric)?;
    let data = load_csv(&a.data)?;
    let validation = a.validation.as_ref().map(load_csv).transpose()?;
    let ms = a.ms.clone().unwrap_or_else(|| match a.preset {
        Preset::Small => vec![1, 3, 5],
        Preset::Large => vec![3, 7, 11],
    });
    let pr = &a.protocol;
    let protocol = protocol_for(&data, pr.folds, pr.trials, pr.positive_class.as_deref())?;
    let report = run_gridsearch(
        ctx,
        &data,
        validation.as_ref(),
        &base,
        &a.betas,
        &ms,
        metric,
        &protocol,
    )?;
    if let Some(p) = &a.jsonl {
        write_file(p, &to_jsonl(&report.rows))?;
    }
    emit(a.output.as_deref(), &to_json(&report), Some(grid_table(&report)))
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec: SyntheticTreeSpec = serde_json::from_str(&read_file(&a.spec)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.spec.display())))?;
    let data = generate_synthetic_tree(&spec)?;
    save_csv(&data, &a.out).map_err(|e| CliError::Compute(e.to_string()))
}
