//! Horospherical decision trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::horosplit::{best_split, class_counts, Horosphere, SplitterConfig};
use crate::hypgeo::{busemann_raw, IdealPoint, PoincarePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// Nodes with at most this many samples become leaves.
    pub min_samples: usize,
    pub max_depth: Option<usize>,
    pub splitter_config: SplitterConfig,
    /// Per-node slack is `2^n` with `n` uniform on this inclusive range.
    pub c_exponent_range: (i32, i32),
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_samples: 1,
            max_depth: None,
            splitter_config: SplitterConfig::default(),
            c_exponent_range: (-3, 5),
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples == 0 {
            return Err(invalid("min_samples must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(invalid("max_depth must be at least 1 when set"));
        }
        let (lo, hi) = self.c_exponent_range;
        if lo > hi {
            return Err(invalid(format!("empty C exponent range [{lo}, {hi}]")));
        }
        self.splitter_config.validate()
    }
}

/// A fitted node. Internal nodes route `busemann(w, x) < b` to `inside`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        w: Vec<f64>,
        b: f64,
        gain: f64,
        inside: Box<TreeNode>,
        outside: Box<TreeNode>,
    },
    Leaf {
        histogram: Vec<usize>,
    },
}

impl TreeNode {
    fn leaf(histogram: Vec<usize>) -> Self {
        Self::Leaf { histogram }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Leaf { .. } => 0,
            Self::Internal { inside, outside, .. } => 1 + inside.depth().max(outside.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Self::Leaf { .. } => 1,
            Self::Internal { inside, outside, .. } => inside.n_leaves() + outside.n_leaves(),
        }
    }

    pub fn horosphere(&self) -> Option<Horosphere> {
        match self {
            Self::Leaf { .. } => None,
            Self::Internal { w, b, .. } => Some(Horosphere {
                ideal: IdealPoint::new(w.clone()).ok()?,
                offset: *b,
            }),
        }
    }

    fn validate(&self, dim: usize, n_classes: usize) -> Result<()> {
        // explicit stack: fitted trees can be deep
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                Self::Leaf { histogram } => {
                    if histogram.len() != n_classes || histogram.iter().all(|&c| c == 0) {
                        return Err(invalid("leaf histogram is empty or has the wrong class count"));
                    }
                }
                Self::Internal { w, b, inside, outside, .. } => {
                    check_dim(dim, w.len())?;
                    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                        return Err(invalid("internal node has non-finite parameters"));
                    }
                    stack.push(inside);
                    stack.push(outside);
                }
            }
        }
        Ok(())
    }
}

/// A fitted tree; serializes as `{dim, nodes}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoroTree {
    pub dim: usize,
    #[serde(rename = "nodes")]
    pub root: TreeNode,
}

impl HoroTree {
    pub fn n_classes(&self) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { histogram } => return histogram.len(),
                TreeNode::Internal { inside, .. } => node = inside,
            }
        }
    }

    /// Checks structural invariants of a deserialized tree.
    pub fn validate(&self) -> Result<()> {
        self.root.validate(self.dim, self.n_classes())
    }

    /// Histogram of the leaf reached by `x`.
    pub fn leaf_histogram(&self, x: &PoincarePoint) -> Result<&[usize]> {
        check_dim(self.dim, x.dim())?;
        let n2 = x.norm_sq();
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { histogram } => return Ok(histogram),
                TreeNode::Internal { w, b, inside, outside, .. } => {
                    node = if busemann_raw(w, x.coords(), n2) < *b { inside } else { outside };
                }
            }
        }
    }

    /// Class distribution of the leaf reached by `x`.
    pub fn predict_proba(&self, x: &PoincarePoint) -> Result<Vec<f64>> {
        let h = self.leaf_histogram(x)?;
        let total: usize = h.iter().sum();
        Ok(h.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trees serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        de.disable_recursion_limit();
        let tree = Self::deserialize(&mut de)?;
        de.end()?;
        tree.validate()?;
        Ok(tree)
    }
}

/// Free-function form of [`HoroTree::predict_proba`].
pub fn predict_tree(tree: &HoroTree, x: &PoincarePoint) -> Result<Vec<f64>> {
    tree.predict_proba(x)
}

/// Fits a tree on `points` with labels in `[0, max label]`.
pub fn fit_tree(points: &[PoincarePoint], labels: &[usize], params: &TreeParams) -> Result<HoroTree> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    fit_tree_with_rng(points, labels, n_classes, params, &mut rng)
}

pub(crate) fn fit_tree_with_rng<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rng: &mut R,
) -> Result<HoroTree> {
    params.validate()?;
    if points.is_empty() {
        return Err(invalid("cannot fit a tree on an empty dataset"));
    }
    if points.len() != labels.len() {
        return Err(invalid("points and labels differ in length"));
    }
    let dim = points[0].dim();
    for p in points {
        check_dim(dim, p.dim())?;
    }
    if labels.iter().any(|&l| l >= n_classes) {
        return Err(invalid("label out of range"));
    }
    let grower = Grower {
        points,
        labels,
        n_classes,
        params,
    };
    let root = grower.grow((0..points.len()).collect(), 0, rng)?;
    Ok(HoroTree { dim, root })
}

struct Grower<'a> {
    points: &'a [PoincarePoint],
    labels: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
}

impl Grower<'_> {
    fn grow<R: Rng + ?Sized>(&self, idx: Vec<usize>, depth: usize, rng: &mut R) -> Result<TreeNode> {
        let labels: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        let histogram = class_counts(&labels, self.n_classes);
        let pure = histogram.iter().filter(|&&c| c > 0).count() <= 1;
        if pure
            || idx.len() <= self.params.min_samples
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return Ok(TreeNode::leaf(histogram));
        }

        let (lo, hi) = self.params.c_exponent_range;
        let mut cfg = self.params.splitter_config.clone();
        cfg.c = 2f64.powi(rng.random_range(lo..=hi));
        let mut split_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());

        let points: Vec<PoincarePoint> = idx.iter().map(|&i| self.points[i].clone()).collect();
        let Some(split) = best_split(&points, &labels, &cfg, &mut split_rng)? else {
            return Ok(TreeNode::leaf(histogram));
        };
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (&i, p) in idx.iter().zip(&points) {
            if split.horosphere.contains(p) {
                inside.push(i);
            } else {
                outside.push(i);
            }
        }
        if inside.is_empty() || outside.is_empty() {
            return Ok(TreeNode::leaf(histogram));
        }
        drop(points);
        let inside = self.grow(inside, depth + 1, rng)?;
        let outside = self.grow(outside, depth + 1, rng)?;
        Ok(TreeNode::Internal {
            w: split.horosphere.ideal.direction().to_vec(),
            b: split.horosphere.offset,
            gain: split.info_gain,
            inside: Box::new(inside),
            outside: Box::new(outside),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> PoincarePoint {
        PoincarePoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn pure_dataset_is_a_leaf() {
        let points = [pt(&[0.1, 0.0]), pt(&[0.0, 0.3]), pt(&[-0.2, 0.1])];
        let tree = fit_tree(&points, &[0, 0, 0], &TreeParams::default()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { histogram: vec![3] });
        assert_eq!(tree.predict_proba(&pt(&[0.5, 0.5])).unwrap(), vec![1.0]);
    }

    #[test]
    fn min_samples_stops_at_root() {
        let points = [pt(&[0.1, 0.0]), pt(&[0.0, 0.3]), pt(&[-0.2, 0.1])];
        let params = TreeParams { min_samples: 3, ..Default::default() };
        let tree = fit_tree(&points, &[0, 1, 0], &params).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { histogram: vec![2, 1] });
    }

    #[test]
    fn empty_and_mismatched_inputs_fail() {
        assert!(fit_tree(&[], &[], &TreeParams::default()).is_err());
        let tree = fit_tree(&[pt(&[0.1, 0.0])], &[0], &TreeParams::default()).unwrap();
        assert!(tree.predict_proba(&pt(&[0.1, 0.0, 0.0])).is_err());
    }

    #[test]
    fn boundary_routes_outside() {
        let w = vec![1.0, 0.0];
        let x = pt(&[0.5, 0.0]);
        let b = busemann_raw(&w, x.coords(), x.norm_sq());
        let tree = HoroTree {
            dim: 2,
            root: TreeNode::Internal {
                w,
                b,
                gain: 0.5,
                inside: Box::new(TreeNode::leaf(vec![1, 0])),
                outside: Box::new(TreeNode::leaf(vec![0, 1])),
            },
        };
        assert_eq!(tree.predict_proba(&x).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn json_shape() {
        let tree = HoroTree {
            dim: 2,
            root: TreeNode::Internal {
                w: vec![0.6, 0.8],
                b: -0.1,
                gain: 0.25,
                inside: Box::new(TreeNode::leaf(vec![3, 0])),
                outside: Box::new(TreeNode::leaf(vec![0, 2])),
            },
        };
        let v: serde_json::Value = serde_json::from_str(&tree.to_json()).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["nodes"]["type"], "internal");
        assert_eq!(v["nodes"]["inside"]["histogram"][0], 3);
        assert_eq!(HoroTree::from_json(&tree.to_json()).unwrap(), tree);
        assert!(HoroTree::from_json(r#"{"dim":2,"nodes":{"type":"leaf","histogram":[0,0]}}"#).is_err());
    }
}
