//! Horospherical random forests: bootstrap ensembles of [`HoroTree`]s.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, HoroError, Result};
use crate::horotree::{fit_tree_with_rng, HoroTree, TreeParams};
use crate::hypgeo::PoincarePoint;

pub const FORMAT_VERSION: u32 = 1;

// fitted trees recurse once per level
const WORKER_STACK: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree_params: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree_params: TreeParams::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(invalid("n_trees must be at least 1"));
        }
        self.tree_params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub dim: usize,
    pub params: ForestParams,
    pub trees: Vec<HoroTree>,
}

/// Random stream owned by tree `index`; independent of training order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Bootstrap sample of size `n` drawn from `rng`.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn fit_one(
    points: &[PoincarePoint],
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
    index: usize,
) -> Result<HoroTree> {
    let mut rng = tree_rng(params.seed, index);
    if params.bootstrap {
        let idx = bootstrap_indices(points.len(), &mut rng);
        let pts: Vec<PoincarePoint> = idx.iter().map(|&i| points[i].clone()).collect();
        let lbl: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        fit_tree_with_rng(&pts, &lbl, n_classes, &params.tree_params, &mut rng)
    } else {
        fit_tree_with_rng(points, labels, n_classes, &params.tree_params, &mut rng)
    }
}

/// Runs `f` on a pool of `workers` threads, or the machine's parallelism
/// when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new().stack_size(WORKER_STACK);
    if let Some(w) = workers {
        if w == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| HoroError::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Fits a forest using the default worker count.
pub fn fit_forest(
    points: &[PoincarePoint],
    labels: &[usize],
    class_names: Vec<String>,
    params: &ForestParams,
) -> Result<ForestModel> {
    fit_forest_with_workers(points, labels, class_names, params, None)
}

pub fn fit_forest_with_workers(
    points: &[PoincarePoint],
    labels: &[usize],
    class_names: Vec<String>,
    params: &ForestParams,
    workers: Option<usize>,
) -> Result<ForestModel> {
    params.validate()?;
    if points.is_empty() {
        return Err(invalid("cannot fit a forest on an empty dataset"));
    }
    if points.len() != labels.len() {
        return Err(invalid("points and labels differ in length"));
    }
    let n_classes = class_names.len();
    if labels.iter().any(|&l| l >= n_classes) {
        return Err(invalid("label out of range of class names"));
    }
    let dim = points[0].dim();
    let trees = with_workers(workers, || {
        (0..params.n_trees)
            .into_par_iter()
            .map(|i| fit_one(points, labels, n_classes, params, i))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ForestModel {
        format_version: FORMAT_VERSION,
        class_names,
        dim,
        params: params.clone(),
        trees,
    })
}

fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Plurality class of `n_classes` from per-tree votes; ties go to the lowest id.
pub fn plurality(votes: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &v in votes {
        counts[v] += 1;
    }
    argmax_lowest(counts.into_iter().map(|c| c as f64))
}

impl ForestModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Each tree's leaf majority class.
    pub fn votes(&self, x: &PoincarePoint) -> Result<Vec<usize>> {
        check_dim(self.dim, x.dim())?;
        self.trees
            .iter()
            .map(|t| {
                t.leaf_histogram(x)
                    .map(|h| argmax_lowest(h.iter().map(|&c| c as f64)))
            })
            .collect()
    }

    /// Majority vote.
    pub fn predict(&self, x: &PoincarePoint) -> Result<usize> {
        Ok(plurality(&self.votes(x)?, self.n_classes()))
    }

    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba(&self, x: &PoincarePoint) -> Result<Vec<f64>> {
        check_dim(self.dim, x.dim())?;
        let mut probs = vec![0.0; self.n_classes()];
        for t in &self.trees {
            let h = t.leaf_histogram(x)?;
            let total: usize = h.iter().sum();
            for (p, &c) in probs.iter_mut().zip(h) {
                *p += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        Ok(probs)
    }

    pub fn predict_many(&self, points: &[PoincarePoint]) -> Result<Vec<usize>> {
        points.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn predict_proba_many(&self, points: &[PoincarePoint]) -> Result<Vec<Vec<f64>>> {
        points.par_iter().map(|x| self.predict_proba(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        de.disable_recursion_limit();
        let model = Self::deserialize(&mut de)?;
        de.end()?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.trees.is_empty() {
            return Err(invalid("model has no trees"));
        }
        for t in &self.trees {
            check_dim(self.dim, t.dim)?;
            t.validate()?;
            if t.n_classes() != self.n_classes() {
                return Err(invalid("tree class count differs from the model's class names"));
            }
        }
        Ok(())
    }
}

pub fn predict_forest(model: &ForestModel, x: &PoincarePoint) -> Result<usize> {
    model.predict(x)
}

pub fn predict_proba_forest(model: &ForestModel, x: &PoincarePoint) -> Result<Vec<f64>> {
    model.predict_proba(x)
}
