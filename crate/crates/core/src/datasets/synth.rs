use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{invalid, Result};
use crate::hypgeo::{mobius_add, norm, PoincarePoint};

fn default_dim() -> usize {
    2
}

fn default_edge_length() -> f64 {
    1.0
}

/// A uniform `branching`-ary tree of the given depth, embedded in the ball,
/// with classes given as unions of subtrees.
///
/// Nodes are numbered breadth-first: the root is 0 and the children of node
/// `i` are `branching * i + 1 ..= branching * i + branching`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTreeSpec {
    pub branching: usize,
    pub depth: usize,
    pub n_points: usize,
    /// Each class is the union of the subtrees rooted at the listed nodes.
    pub class_subtrees: Vec<Vec<usize>>,
    /// Standard deviation of the per-point displacement, in hyperbolic units.
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Hyperbolic distance between a node and its children.
    #[serde(default = "default_edge_length")]
    pub edge_length: f64,
    /// Rotation of the whole embedding; drawn from the seed when absent.
    #[serde(default)]
    pub angle_offset: Option<f64>,
    /// Apply a seeded uniformly random rotation of the whole ball, so the
    /// embedding plane is not aligned with the coordinate axes.
    #[serde(default)]
    pub random_rotation: bool,
}

struct Embedding {
    positions: Vec<Vec<f64>>,
    parent: Vec<Option<usize>>,
}

impl SyntheticTreeSpec {
    fn n_nodes(&self) -> usize {
        (0..=self.depth).map(|d| self.branching.pow(d as u32)).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.branching < 1 {
            return Err(invalid("branching must be at least 1"));
        }
        if self.dim < 2 {
            return Err(invalid("synthetic trees need at least two dimensions"));
        }
        if self.n_points == 0 {
            return Err(invalid("n_points must be positive"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(invalid("noise_scale must be positive"));
        }
        if !(self.edge_length > 0.0 && self.edge_length.is_finite()) {
            return Err(invalid("edge_length must be positive"));
        }
        let n_nodes = self.n_nodes();
        for (c, roots) in self.class_subtrees.iter().enumerate() {
            if roots.is_empty() {
                return Err(invalid(format!("class {c} lists no subtrees")));
            }
            if let Some(bad) = roots.iter().find(|&&r| r >= n_nodes) {
                return Err(invalid(format!(
                    "class {c} references node {bad}, but the tree has {n_nodes} nodes"
                )));
            }
        }
        Ok(())
    }

    /// Sarkar-style placement: depth `k` sits at hyperbolic radius
    /// `k * edge_length`, each child at the centre of an equal share of its
    /// parent's angular sector.
    fn embed(&self, angle_offset: f64) -> Embedding {
        let n = self.n_nodes();
        let mut positions = vec![vec![0.0; self.dim]; n];
        let mut parent = vec![None; n];
        let mut sector = vec![(0.0, TAU); n];
        let mut depth = vec![0usize; n];
        for node in 0..n {
            let (start, width) = sector[node];
            let child_width = width / self.branching as f64;
            for j in 0..self.branching {
                let child = self.branching * node + j + 1;
                if child >= n {
                    break;
                }
                parent[child] = Some(node);
                depth[child] = depth[node] + 1;
                sector[child] = (start + j as f64 * child_width, child_width);
                let angle = angle_offset + start + (j as f64 + 0.5) * child_width;
                let r = (depth[child] as f64 * self.edge_length / 2.0).tanh();
                positions[child][0] = r * angle.cos();
                positions[child][1] = r * angle.sin();
            }
        }
        Embedding { positions, parent }
    }
}

/// Rows of a Haar-random orthogonal matrix: Gram-Schmidt on Gaussian rows.
fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|a| *a /= n);
            rows.push(v);
        }
    }
    rows
}

/// Node sets of every class, in spec order.
fn class_node_sets(spec: &SyntheticTreeSpec, emb: &Embedding) -> Vec<Vec<bool>> {
    let n = emb.positions.len();
    spec.class_subtrees
        .iter()
        .map(|roots| {
            let mut member = vec![false; n];
            for node in 0..n {
                let mut cur = Some(node);
                while let Some(c) = cur {
                    if roots.contains(&c) {
                        member[node] = true;
                        break;
                    }
                    cur = emb.parent[c];
                }
            }
            member
        })
        .collect()
}

/// Samples a labelled dataset around the nodes of the embedded tree.
///
/// Each point is labelled by the smallest class whose node set contains its
/// node; nodes outside every class form a trailing `background` class.
pub fn generate_synthetic_tree(spec: &SyntheticTreeSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offset = spec.angle_offset.unwrap_or_else(|| rng.random_range(0.0..TAU));
    let emb = spec.embed(offset);
    let sets = class_node_sets(spec, &emb);
    let sizes: Vec<usize> = sets.iter().map(|s| s.iter().filter(|&&m| m).count()).collect();

    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            let both = sets[a].iter().zip(&sets[b]).filter(|(x, y)| **x && **y).count();
            if both != 0 && both != sizes[a] && both != sizes[b] {
                return Err(invalid(format!("classes {a} and {b} overlap without nesting")));
            }
        }
    }

    let n_nodes = emb.positions.len();
    let background = sets.len();
    let node_label: Vec<usize> = (0..n_nodes)
        .map(|node| {
            (0..sets.len())
                .filter(|&c| sets[c][node])
                .min_by_key(|&c| (sizes[c], c))
                .unwrap_or(background)
        })
        .collect();

    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);

    let mut points = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    for i in 0..spec.n_points {
        let node = order[i % n_nodes];
        let v: Vec<f64> = (0..spec.dim)
            .map(|_| spec.noise_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let len = norm(&v);
        let step: Vec<f64> = if len > 0.0 {
            let s = (len / 2.0).tanh() / len;
            v.iter().map(|c| c * s).collect()
        } else {
            v
        };
        points.push(PoincarePoint::new(mobius_add(&emb.positions[node], &step))?);
        labels.push(node_label[node]);
    }

    if spec.random_rotation {
        let q = random_orthogonal(spec.dim, &mut rng);
        points = points
            .into_iter()
            .map(|p| {
                let x = p.coords();
                PoincarePoint::new(q.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
            })
            .collect::<Result<_>>()?;
    }

    let mut class_names: Vec<String> = (0..sets.len()).map(|c| format!("class_{c}")).collect();
    class_names.push("background".into());
    for (c, name) in class_names.iter().enumerate().take(sets.len()) {
        if !labels.contains(&c) {
            return Err(invalid(format!("{name} received no points")));
        }
    }
    let mut dataset = Dataset::new(points, labels, class_names, "synthetic")?;
    dataset.canonicalize();
    Ok(dataset)
}
