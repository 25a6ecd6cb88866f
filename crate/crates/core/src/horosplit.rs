//! Horosphere split search.
//!
//! A node's multi-class data is reduced to a pool of binary problems
//! (one-vs-rest plus hyperclasses merged by LCA depth), each problem is fit
//! with a class-balanced large-margin horosphere objective, and the
//! horosphere with the highest Gini information gain wins.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{check_dim, invalid, Result};
use crate::hypgeo::{
    busemann_raw, dot, einstein_midpoint, lca_similarity, merge_class_means, ClassMean,
    IdealPoint, PoincarePoint,
};

/// Lower bound on the margin scale.
pub const MU_MIN: f64 = 1e-8;
/// Splits whose gain does not exceed this are reported as no split.
pub const GAIN_MIN: f64 = 1e-9;

/// `{x : busemann(w, x) < b}` is the inside of the horosphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Horosphere {
    pub ideal: IdealPoint,
    pub offset: f64,
}

impl Horosphere {
    pub fn new(ideal: IdealPoint, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(invalid("horosphere offset must be finite"));
        }
        Ok(Self { ideal, offset })
    }

    /// Strict inequality: points on the horosphere are outside.
    pub fn contains(&self, x: &PoincarePoint) -> bool {
        busemann_raw(self.ideal.direction(), x.coords(), x.norm_sq()) < self.offset
    }

    pub fn inside_mask(&self, points: &[PoincarePoint]) -> Vec<bool> {
        points.iter().map(|p| self.contains(p)).collect()
    }
}

/// Output of the large-margin fit: score `mu * busemann_inv(w, x) - o`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitterSolution {
    pub mu: f64,
    pub ideal: IdealPoint,
    pub o: f64,
}

impl SplitterSolution {
    pub fn score(&self, x: &PoincarePoint) -> f64 {
        -self.mu * busemann_raw(self.ideal.direction(), x.coords(), x.norm_sq()) - self.o
    }
}

/// Where a candidate split came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CandidateSource {
    OneVsRest(usize),
    Hyperclass(usize),
    AxisAligned,
    RandomIdeal,
}

impl fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OneVsRest(c) => write!(f, "one_vs_rest({c})"),
            Self::Hyperclass(s) => write!(f, "hyperclass({s})"),
            Self::AxisAligned => f.write_str("axis_aligned"),
            Self::RandomIdeal => f.write_str("random_ideal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProblem {
    /// Sorted class ids mapped to `+1`.
    pub positive_classes: Vec<usize>,
    pub sample_signs: Vec<i8>,
    pub per_sample_weight: Vec<f64>,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterMode {
    Optimizer,
    AxisAlignedEnum,
    RandomIdealFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitterConfig {
    /// Slack weight; trees overwrite it per node.
    pub c: f64,
    pub beta: f64,
    pub use_hyperclasses: bool,
    pub use_class_balance: bool,
    pub mode: SplitterMode,
    pub max_iters: usize,
    pub tol: f64,
    pub patience: usize,
    pub restarts: usize,
    pub n_fallback_ideals: usize,
    /// Restrict fallback ideal points to a random coordinate subspace of
    /// this many axes.
    pub fallback_subspace: Option<usize>,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            beta: 0.0,
            use_hyperclasses: true,
            use_class_balance: true,
            mode: SplitterMode::Optimizer,
            max_iters: 1000,
            tol: 1e-6,
            patience: 5,
            restarts: 3,
            n_fallback_ideals: 10,
            fallback_subspace: None,
        }
    }
}

impl SplitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("C must be positive, got {}", self.c)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(invalid(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if self.max_iters == 0 || self.restarts == 0 || self.patience == 0 {
            return Err(invalid("max_iters, restarts and patience must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.n_fallback_ideals == 0 {
            return Err(invalid("n_fallback_ideals must be at least 1"));
        }
        if self.fallback_subspace == Some(0) {
            return Err(invalid("fallback_subspace must be at least 1"));
        }
        Ok(())
    }

    fn effective_beta(&self) -> f64 {
        if self.use_class_balance {
            self.beta
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub horosphere: Horosphere,
    pub info_gain: f64,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConvergenceFailure {
    #[error("optimizer did not converge within the iteration budget")]
    MaxIters,
    #[error("optimizer produced non-finite values")]
    NonFinite,
}

/// Gini impurity of a class histogram.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(invalid("gini of an empty node"));
    }
    Ok(gini_of(class_counts, total))
}

fn gini_of(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

/// Gain of moving `inside` out of `parent`; empty sides contribute nothing.
pub(crate) fn gain_from_counts(parent: &[usize], inside: &[usize]) -> f64 {
    let n: usize = parent.iter().sum();
    let n_in: usize = inside.iter().sum();
    let n_out = n - n_in;
    let outside: Vec<usize> = parent.iter().zip(inside).map(|(p, i)| p - i).collect();
    let nf = n as f64;
    gini_of(parent, n)
        - (n_in as f64 / nf) * gini_of(inside, n_in)
        - (n_out as f64 / nf) * gini_of(&outside, n_out)
}

pub(crate) fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

fn n_classes_of(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Gini gain of partitioning `labels` by `inside_mask`.
pub fn information_gain(labels: &[usize], inside_mask: &[bool]) -> Result<f64> {
    if labels.len() != inside_mask.len() {
        return Err(invalid("labels and mask differ in length"));
    }
    if labels.is_empty() {
        return Err(invalid("information gain of an empty node"));
    }
    let k = n_classes_of(labels);
    let parent = class_counts(labels, k);
    let mut inside = vec![0; k];
    for (&l, &m) in labels.iter().zip(inside_mask) {
        if m {
            inside[l] += 1;
        }
    }
    Ok(gain_from_counts(&parent, &inside))
}

fn balance_weight(beta: f64, n: usize) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        (1.0 - beta) / (1.0 - beta.powi(n as i32))
    }
}

fn make_problem(
    labels: &[usize],
    positive_classes: Vec<usize>,
    beta: f64,
    source: CandidateSource,
) -> Option<BinaryProblem> {
    let sample_signs: Vec<i8> = labels
        .iter()
        .map(|l| if positive_classes.binary_search(l).is_ok() { 1 } else { -1 })
        .collect();
    let n_pos = sample_signs.iter().filter(|&&s| s > 0).count();
    let n_neg = sample_signs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let (w_pos, w_neg) = (balance_weight(beta, n_pos), balance_weight(beta, n_neg));
    let per_sample_weight = sample_signs
        .iter()
        .map(|&s| if s > 0 { w_pos } else { w_neg })
        .collect();
    Some(BinaryProblem {
        positive_classes,
        sample_signs,
        per_sample_weight,
        source,
    })
}

/// One-vs-rest problems for every present class, followed (optionally) by
/// the hyperclass problems produced while greedily merging the pair of
/// clusters whose means have the deepest lowest common ancestor.
///
/// Problems are keyed by their positive class set; repeats are dropped.
pub fn build_binary_problems(
    points: &[PoincarePoint],
    labels: &[usize],
    beta: f64,
    use_hyperclasses: bool,
) -> Result<Vec<BinaryProblem>> {
    if points.len() != labels.len() {
        return Err(invalid("points and labels differ in length"));
    }
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(invalid("binary problems need at least two classes"));
    }

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut problems = Vec::with_capacity(2 * present.len() - 2);
    let mut push = |positive: Vec<usize>, source, problems: &mut Vec<BinaryProblem>| {
        if seen.insert(positive.clone()) {
            if let Some(p) = make_problem(labels, positive, beta, source) {
                problems.push(p);
            }
        }
    };

    for &c in &present {
        push(vec![c], CandidateSource::OneVsRest(c), &mut problems);
    }

    if use_hyperclasses {
        let mut clusters: Vec<(Vec<usize>, ClassMean)> = present
            .iter()
            .map(|&c| {
                let members = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p);
                ClassMean::from_members(c, members).map(|m| (vec![c], m))
            })
            .collect::<Result<_>>()?;

        for step in 0..present.len() - 2 {
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let s = lca_similarity(&clusters[i].1.mean, &clusters[j].1.mean)?;
                    if best.is_none_or(|(_, _, bs)| s > bs) {
                        best = Some((i, j, s));
                    }
                }
            }
            let (i, j, _) = best.expect("at least two clusters remain");
            let (classes_j, mean_j) = clusters.remove(j);
            let (classes_i, mean_i) = &mut clusters[i];
            classes_i.extend(classes_j);
            classes_i.sort_unstable();
            *mean_i = merge_class_means(mean_i, &mean_j)?;
            push(classes_i.clone(), CandidateSource::Hyperclass(step), &mut problems);
        }
    }
    Ok(problems)
}

/// Flattened view of a binary problem used by the loss and its gradient.
struct Prepared {
    dim: usize,
    coords: Vec<f64>,
    log_conformal: Vec<f64>,
    signs: Vec<f64>,
    weights: Vec<f64>,
    c: f64,
}

impl Prepared {
    fn new(problem: &BinaryProblem, points: &[PoincarePoint], c: f64) -> Result<Self> {
        if problem.sample_signs.len() != points.len() || problem.per_sample_weight.len() != points.len()
        {
            return Err(invalid("binary problem and points differ in length"));
        }
        let dim = points.first().map_or(0, PoincarePoint::dim);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dim(dim, p.dim())?;
            coords.extend_from_slice(p.coords());
        }
        Ok(Self {
            dim,
            coords,
            log_conformal: points.iter().map(|p| (1.0 - p.norm_sq()).ln()).collect(),
            signs: problem.sample_signs.iter().map(|&s| f64::from(s)).collect(),
            weights: problem.per_sample_weight.clone(),
            c,
        })
    }

    fn len(&self) -> usize {
        self.signs.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// `busemann_inv(w, x_i)` for every sample.
    fn features(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.len()).map(|i| {
            let d2: f64 = self.point(i).iter().zip(w).map(|(x, w)| (w - x) * (w - x)).sum();
            self.log_conformal[i] - d2.ln()
        }));
    }

    fn loss(&self, mu: f64, o: f64, w: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.features(w, scratch);
        let hinge: f64 = scratch
            .iter()
            .zip(&self.signs)
            .zip(&self.weights)
            .map(|((g, y), wt)| wt * (1.0 - y * (mu * g - o)).max(0.0))
            .sum();
        0.5 * mu * mu + self.c * hinge
    }

    /// Subgradient with respect to `(mu, o, w)`, `w` treated as a free
    /// vector in the ambient space.
    fn gradient(&self, mu: f64, o: f64, w: &[f64], scratch: &mut Vec<f64>) -> (f64, f64, Vec<f64>) {
        self.features(w, scratch);
        let mut g_mu = mu;
        let mut g_o = 0.0;
        let mut g_w = vec![0.0; self.dim];
        for i in 0..self.len() {
            let y = self.signs[i];
            let g = scratch[i];
            if 1.0 - y * (mu * g - o) <= 0.0 {
                continue;
            }
            let coef = self.c * self.weights[i] * y;
            g_mu -= coef * g;
            g_o += coef;
            let x = self.point(i);
            let d2: f64 = x.iter().zip(w).map(|(x, w)| (w - x) * (w - x)).sum();
            let scale = 2.0 * coef * mu / d2;
            for ((gw, wj), xj) in g_w.iter_mut().zip(w).zip(x) {
                *gw += scale * (wj - xj);
            }
        }
        (g_mu, g_o, g_w)
    }
}

/// Class-balanced horosphere hinge loss of `sol` on `problem`.
pub fn horosvm_loss(
    sol: &SplitterSolution,
    problem: &BinaryProblem,
    points: &[PoincarePoint],
    c: f64,
) -> Result<f64> {
    let prep = Prepared::new(problem, points, c)?;
    check_dim(prep.dim, sol.ideal.dim())?;
    Ok(prep.loss(sol.mu, sol.o, sol.ideal.direction(), &mut Vec::new()))
}

/// Analytic subgradient of [`horosvm_loss`] in `(mu, o, w)`, with `w` as an
/// unconstrained ambient vector.
pub fn horosvm_gradient(
    sol: &SplitterSolution,
    problem: &BinaryProblem,
    points: &[PoincarePoint],
    c: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let prep = Prepared::new(problem, points, c)?;
    check_dim(prep.dim, sol.ideal.dim())?;
    Ok(prep.gradient(sol.mu, sol.o, sol.ideal.direction(), &mut Vec::new()))
}

pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|c| *c /= n);
    true
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

struct Descent {
    mu: f64,
    o: f64,
    w: Vec<f64>,
    loss: f64,
    converged: bool,
}

/// Projected subgradient descent with a backtracking step.
fn descend(prep: &Prepared, mut w: Vec<f64>, cfg: &SplitterConfig) -> std::result::Result<Descent, ConvergenceFailure> {
    let mut scratch = Vec::with_capacity(prep.len());
    let mut mu = 1.0;
    prep.features(&w, &mut scratch);
    let mut o = median(&mut scratch.clone());
    let mut loss = prep.loss(mu, o, &w, &mut scratch);
    if !loss.is_finite() {
        return Err(ConvergenceFailure::NonFinite);
    }

    let mut step = 1.0;
    let mut quiet = 0;
    let mut cand_w = vec![0.0; w.len()];
    for _ in 0..cfg.max_iters {
        let (g_mu, g_o, mut g_w) = prep.gradient(mu, o, &w, &mut scratch);
        // tangent component on the sphere
        let radial = dot(&g_w, &w);
        g_w.iter_mut().zip(&w).for_each(|(g, wj)| *g -= radial * wj);
        let g_mu = if mu <= MU_MIN && g_mu > 0.0 { 0.0 } else { g_mu };
        let g_norm2 = g_mu * g_mu + g_o * g_o + dot(&g_w, &g_w);
        if !g_norm2.is_finite() {
            return Err(ConvergenceFailure::NonFinite);
        }
        if g_norm2 == 0.0 {
            return Ok(Descent { mu, o, w, loss, converged: true });
        }

        let mut t = step;
        let accepted = loop {
            let cand_mu = (mu - t * g_mu).max(MU_MIN);
            let cand_o = o - t * g_o;
            cand_w.iter_mut().zip(&w).zip(&g_w).for_each(|((c, wj), g)| *c = wj - t * g);
            if normalize(&mut cand_w) {
                let cand_loss = prep.loss(cand_mu, cand_o, &cand_w, &mut scratch);
                if cand_loss < loss {
                    break Some((cand_mu, cand_o, cand_loss));
                }
            }
            t *= 0.5;
            if t * g_norm2.sqrt() < 1e-14 {
                break None;
            }
        };
        let Some((new_mu, new_o, new_loss)) = accepted else {
            // no descent along the subgradient: a kink of the hinge
            return Ok(Descent { mu, o, w, loss, converged: true });
        };
        let rel = (loss - new_loss) / loss.abs().max(1e-12);
        mu = new_mu;
        o = new_o;
        std::mem::swap(&mut w, &mut cand_w);
        loss = new_loss;
        step = 2.0 * t;
        if rel < cfg.tol {
            quiet += 1;
            if quiet >= cfg.patience {
                return Ok(Descent { mu, o, w, loss, converged: true });
            }
        } else {
            quiet = 0;
        }
    }
    Ok(Descent { mu, o, w, loss, converged: false })
}

/// Fits the large-margin horosphere objective to `problem`.
///
/// The first restart starts from the direction of the positive class mean
/// relative to the negative one; the others from random ideal points. The
/// lowest-loss converged restart is returned.
pub fn fit_splitter<R: Rng + ?Sized>(
    problem: &BinaryProblem,
    points: &[PoincarePoint],
    config: &SplitterConfig,
    rng: &mut R,
) -> std::result::Result<SplitterSolution, ConvergenceFailure> {
    let prep = Prepared::new(problem, points, config.c).map_err(|_| ConvergenceFailure::NonFinite)?;
    let dim = prep.dim;

    let mut best: Option<Descent> = None;
    let mut any_non_finite = false;
    for restart in 0..config.restarts {
        let w = if restart == 0 {
            midpoint_direction(problem, points).unwrap_or_else(|| IdealPoint::random(dim, rng))
        } else {
            IdealPoint::random(dim, rng)
        };
        match descend(&prep, w.direction().to_vec(), config) {
            Ok(d) if d.converged => {
                if best.as_ref().is_none_or(|b| d.loss < b.loss) {
                    best = Some(d);
                }
            }
            Ok(_) => {}
            Err(_) => any_non_finite = true,
        }
    }
    match best {
        Some(d) => Ok(SplitterSolution {
            mu: d.mu,
            ideal: IdealPoint::new(d.w).map_err(|_| ConvergenceFailure::NonFinite)?,
            o: d.o,
        }),
        None if any_non_finite => Err(ConvergenceFailure::NonFinite),
        None => Err(ConvergenceFailure::MaxIters),
    }
}

fn midpoint_direction(problem: &BinaryProblem, points: &[PoincarePoint]) -> Option<IdealPoint> {
    let pos: Vec<bool> = problem.sample_signs.iter().map(|&s| s > 0).collect();
    let neg: Vec<bool> = pos.iter().map(|p| !p).collect();
    let mp = einstein_midpoint(points, &pos).ok()?;
    let mn = einstein_midpoint(points, &neg).ok()?;
    let diff: Vec<f64> = mp.coords().iter().zip(mn.coords()).map(|(a, b)| a - b).collect();
    IdealPoint::new(diff).ok()
}

/// `b = -o / mu`.
pub fn solution_to_horosphere(sol: &SplitterSolution) -> Horosphere {
    Horosphere {
        ideal: sol.ideal.clone(),
        offset: -sol.o / sol.mu,
    }
}

/// Best threshold scan result along one ideal point.
struct Scan {
    gain: f64,
    offsets: Vec<f64>,
}

/// Sorts samples by Busemann value and scores every midpoint threshold.
fn scan_thresholds(ideal: &IdealPoint, points: &[PoincarePoint], labels: &[usize], parent: &[usize]) -> Scan {
    let mut values: Vec<(f64, usize)> = points
        .iter()
        .zip(labels)
        .map(|(p, &l)| (busemann_raw(ideal.direction(), p.coords(), p.norm_sq()), l))
        .collect();
    values.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // everything outside
    let mut scan = Scan {
        gain: 0.0,
        offsets: vec![values[0].0],
    };
    let mut inside = vec![0; parent.len()];
    for k in 0..values.len() - 1 {
        inside[values[k].1] += 1;
        let (lo, hi) = (values[k].0, values[k + 1].0);
        if lo == hi {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        // adjacent floats: the midpoint rounds onto `lo`, but `hi` still
        // separates since inside is strict
        let t = if mid > lo { mid } else { hi };
        let gain = gain_from_counts(parent, &inside);
        if gain > scan.gain {
            scan.gain = gain;
            scan.offsets.clear();
            scan.offsets.push(t);
        } else if gain == scan.gain {
            scan.offsets.push(t);
        }
    }
    scan
}

fn scan_ideals<R: Rng + ?Sized>(
    ideals: Vec<IdealPoint>,
    points: &[PoincarePoint],
    labels: &[usize],
    source: CandidateSource,
    rng: &mut R,
) -> Result<SplitCandidate> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(invalid("threshold scan needs matching, non-empty points and labels"));
    }
    let dim = points[0].dim();
    for p in points {
        check_dim(dim, p.dim())?;
    }
    let parent = class_counts(labels, n_classes_of(labels));
    let mut best_gain = f64::NEG_INFINITY;
    let mut ties: Vec<(usize, f64)> = Vec::new();
    let scans: Vec<Scan> = ideals
        .iter()
        .map(|w| scan_thresholds(w, points, labels, &parent))
        .collect();
    for (i, scan) in scans.iter().enumerate() {
        if scan.gain > best_gain {
            best_gain = scan.gain;
            ties.clear();
        }
        if scan.gain == best_gain {
            ties.extend(scan.offsets.iter().map(|&t| (i, t)));
        }
    }
    let (i, offset) = ties[rng.random_range(0..ties.len())];
    Ok(SplitCandidate {
        horosphere: Horosphere {
            ideal: ideals[i].clone(),
            offset,
        },
        info_gain: best_gain.max(0.0),
        source,
    })
}

/// Exhaustive threshold search at the `2n` signed coordinate axes.
pub fn axis_aligned_enum_split<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    rng: &mut R,
) -> Result<SplitCandidate> {
    let dim = points.first().map_or(0, PoincarePoint::dim);
    let ideals = (0..dim)
        .flat_map(|j| [IdealPoint::axis(dim, j, true), IdealPoint::axis(dim, j, false)])
        .collect();
    scan_ideals(ideals, points, labels, CandidateSource::AxisAligned, rng)
}

/// Threshold search at `n_fallback_ideals` uniformly random ideal points.
pub fn random_ideal_fallback_split<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    n_fallback_ideals: usize,
    rng: &mut R,
) -> Result<SplitCandidate> {
    random_ideal_fallback_split_in(points, labels, n_fallback_ideals, None, rng)
}

/// As [`random_ideal_fallback_split`], optionally drawing each direction
/// inside a random subspace of `subspace` coordinate axes.
pub fn random_ideal_fallback_split_in<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    n_fallback_ideals: usize,
    subspace: Option<usize>,
    rng: &mut R,
) -> Result<SplitCandidate> {
    let dim = points.first().map_or(0, PoincarePoint::dim);
    if dim == 0 {
        return Err(invalid("threshold scan needs non-empty points"));
    }
    let ideals = (0..n_fallback_ideals.max(1))
        .map(|_| match subspace {
            Some(k) if k < dim => {
                let axes = rand::seq::index::sample(rng, dim, k).into_vec();
                IdealPoint::random_in_subspace(dim, &axes, rng)
            }
            _ => IdealPoint::random(dim, rng),
        })
        .collect();
    scan_ideals(ideals, points, labels, CandidateSource::RandomIdeal, rng)
}

fn candidate_for(points: &[PoincarePoint], labels: &[usize], parent: &[usize], h: Horosphere, source: CandidateSource) -> SplitCandidate {
    let mut inside = vec![0; parent.len()];
    for (p, &l) in points.iter().zip(labels) {
        if h.contains(p) {
            inside[l] += 1;
        }
    }
    SplitCandidate {
        horosphere: h,
        info_gain: gain_from_counts(parent, &inside).max(0.0),
        source,
    }
}

/// Every candidate the optimizer mode produces at a node, in problem order.
/// `None` marks a problem whose fit failed.
pub fn optimizer_candidates<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    config: &SplitterConfig,
    rng: &mut R,
) -> Result<Vec<Option<SplitCandidate>>> {
    let problems = build_binary_problems(points, labels, config.effective_beta(), config.use_hyperclasses)?;
    let seeds: Vec<u64> = problems.iter().map(|_| rng.next_u64()).collect();
    let parent = class_counts(labels, n_classes_of(labels));
    Ok(problems
        .par_iter()
        .zip(seeds)
        .map(|(problem, seed)| {
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            fit_splitter(problem, points, config, &mut prng).ok().map(|sol| {
                candidate_for(points, labels, &parent, solution_to_horosphere(&sol), problem.source)
            })
        })
        .collect())
}

/// Finds the highest-gain horosphere for a node, or `None` when no split
/// beats [`GAIN_MIN`].
pub fn best_split<R: Rng + ?Sized>(
    points: &[PoincarePoint],
    labels: &[usize],
    config: &SplitterConfig,
    rng: &mut R,
) -> Result<Option<SplitCandidate>> {
    config.validate()?;
    if points.len() != labels.len() {
        return Err(invalid("points and labels differ in length"));
    }
    if points.len() < 2 || labels.iter().all(|&l| l == labels[0]) {
        return Ok(None);
    }
    let best = match config.mode {
        SplitterMode::AxisAlignedEnum => axis_aligned_enum_split(points, labels, rng)?,
        SplitterMode::RandomIdealFallback => random_ideal_fallback_split_in(
            points,
            labels,
            config.n_fallback_ideals,
            config.fallback_subspace,
            rng,
        )?,
        SplitterMode::Optimizer => {
            // drawn before the fan-out so tie-breaking is schedule independent
            let mut tie_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
            let candidates: Vec<SplitCandidate> = optimizer_candidates(points, labels, config, rng)?
                .into_iter()
                .flatten()
                .collect();
            if candidates.is_empty() {
                random_ideal_fallback_split_in(
                    points,
                    labels,
                    config.n_fallback_ideals,
                    config.fallback_subspace,
                    rng,
                )?
            } else {
                let top = candidates
                    .iter()
                    .map(|c| c.info_gain)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut tied: Vec<SplitCandidate> =
                    candidates.into_iter().filter(|c| c.info_gain == top).collect();
                let pick = tie_rng.random_range(0..tied.len());
                tied.swap_remove(pick)
            }
        }
    };
    Ok((best.info_gain > GAIN_MIN).then_some(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> PoincarePoint {
        PoincarePoint::new(c.to_vec()).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini(&[1, 1, 1, 1]).unwrap(), 0.75);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn information_gain_examples() {
        let g = information_gain(&[0, 0, 1, 1], &[true, true, false, false]).unwrap();
        assert_eq!(g, 0.5);
        let g = information_gain(&[0, 1, 2, 1], &[true; 4]).unwrap();
        assert_eq!(g, 0.0);
        let g = information_gain(&[0, 0, 0, 1], &[true, true, true, false]).unwrap();
        assert_eq!(g, 0.375);
        assert!(information_gain(&[0, 1], &[true]).is_err());
    }

    #[test]
    fn binary_problem_counts() {
        let two = [pt(&[0.1, 0.0]), pt(&[-0.1, 0.0])];
        let p = build_binary_problems(&two, &[0, 1], 0.0, true).unwrap();
        assert_eq!(p.len(), 2);

        let three = [pt(&[0.5, 0.0]), pt(&[0.0, 0.5]), pt(&[-0.5, 0.0])];
        let p = build_binary_problems(&three, &[0, 1, 2], 0.0, true).unwrap();
        assert_eq!(p.len(), 4);
        assert!(matches!(p[3].source, CandidateSource::Hyperclass(0)));
        let p = build_binary_problems(&three, &[0, 1, 2], 0.0, false).unwrap();
        assert_eq!(p.len(), 3);

        assert!(build_binary_problems(&two, &[1, 1], 0.0, true).is_err());
    }

    #[test]
    fn first_merge_joins_nearby_directions() {
        let at = |deg: f64| {
            let r = deg.to_radians();
            pt(&[0.7 * r.cos(), 0.7 * r.sin()])
        };
        let points = [at(10.0), at(20.0), at(200.0)];
        let p = build_binary_problems(&points, &[0, 1, 2], 0.0, true).unwrap();
        let merged: Vec<_> = p
            .iter()
            .filter(|p| matches!(p.source, CandidateSource::Hyperclass(_)))
            .collect();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].positive_classes, vec![0, 1]);
    }

    #[test]
    fn balance_weights_follow_effective_number() {
        let points: Vec<_> = (0..6).map(|i| pt(&[0.1 * i as f64, 0.0])).collect();
        let labels = [0, 1, 1, 1, 1, 1];
        let p = build_binary_problems(&points, &labels, 0.9, false).unwrap();
        let w_one = (1.0 - 0.9) / (1.0 - 0.9f64.powi(1));
        let w_five = (1.0 - 0.9) / (1.0 - 0.9f64.powi(5));
        assert!((p[0].per_sample_weight[0] - w_one).abs() < 1e-15);
        assert!((p[0].per_sample_weight[1] - w_five).abs() < 1e-15);
        let p = build_binary_problems(&points, &labels, 0.0, false).unwrap();
        assert!(p[0].per_sample_weight.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn loss_examples() {
        let points = [pt(&[0.0, 0.0]), pt(&[0.5, 0.0])];
        let problem = make_problem(&[0, 1], vec![0], 0.0, CandidateSource::OneVsRest(0)).unwrap();
        let sol = SplitterSolution {
            mu: 1.0,
            ideal: IdealPoint::new(vec![1.0, 0.0]).unwrap(),
            o: 0.0,
        };
        // origin: hinge 1; (0.5, 0) negative with score 1.0986 -> hinge 2.0986
        let l = horosvm_loss(&sol, &problem, &points, 1.0).unwrap();
        assert!((l - (0.5 + 1.0 + 1.0 + 1.0986122886681098)).abs() < 1e-12);

        let single = [pt(&[0.0, 0.0])];
        let problem = BinaryProblem {
            positive_classes: vec![0],
            sample_signs: vec![1],
            per_sample_weight: vec![1.0],
            source: CandidateSource::OneVsRest(0),
        };
        assert_eq!(horosvm_loss(&sol, &problem, &single, 1.0).unwrap(), 1.5);
    }

    #[test]
    fn horosphere_conversion() {
        let w = IdealPoint::new(vec![0.0, 1.0]).unwrap();
        let h = solution_to_horosphere(&SplitterSolution { mu: 2.0, ideal: w.clone(), o: 1.0 });
        assert_eq!(h.offset, -0.5);
        let h = solution_to_horosphere(&SplitterSolution { mu: 1.0, ideal: w, o: 0.0 });
        assert_eq!(h.offset, 0.0);
    }

    #[test]
    fn boundary_point_is_outside() {
        let w = IdealPoint::new(vec![1.0, 0.0]).unwrap();
        let x = pt(&[0.5, 0.0]);
        let b = busemann_raw(w.direction(), x.coords(), x.norm_sq());
        let h = Horosphere::new(w, b).unwrap();
        assert!(!h.contains(&x));
    }

    #[test]
    fn axis_scan_one_dimensional_check() {
        // Busemann values (-2, -1, 1, 2) with respect to (1, 0)
        let along = |b: f64| pt(&[(-b / 2.0).tanh(), 0.0]);
        let points: Vec<_> = [-2.0, -1.0, 1.0, 2.0].into_iter().map(along).collect();
        let c = axis_aligned_enum_split(&points, &[0, 0, 1, 1], &mut rng(0)).unwrap();
        assert_eq!(c.info_gain, 0.5);
        assert!(c.horosphere.offset > -1.0 && c.horosphere.offset < 1.0);
    }

    #[test]
    fn pure_node_scans_give_zero() {
        let points = [pt(&[0.1, 0.2]), pt(&[0.3, -0.1])];
        let c = axis_aligned_enum_split(&points, &[1, 1], &mut rng(0)).unwrap();
        assert_eq!(c.info_gain, 0.0);
        let c = random_ideal_fallback_split(&points, &[1, 1], 10, &mut rng(0)).unwrap();
        assert_eq!(c.info_gain, 0.0);
        assert!(best_split(&points, &[1, 1], &SplitterConfig::default(), &mut rng(0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn fallback_is_seed_deterministic() {
        let points: Vec<_> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.7;
                pt(&[0.8 * a.cos() * (i as f64 / 20.0), 0.8 * a.sin()])
            })
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let a = random_ideal_fallback_split(&points, &labels, 10, &mut rng(5)).unwrap();
        let b = random_ideal_fallback_split(&points, &labels, 10, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        let c = random_ideal_fallback_split_in(&points, &labels, 10, Some(1), &mut rng(5)).unwrap();
        let nonzero = c.horosphere.ideal.direction().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn two_point_problem_reaches_zero_hinge() {
        let points = [pt(&[0.3, 0.4]), pt(&[-0.2, 0.1])];
        let problem = make_problem(&[0, 1], vec![0], 0.0, CandidateSource::OneVsRest(0)).unwrap();
        let cfg = SplitterConfig { c: 4.0, ..Default::default() };
        let sol = fit_splitter(&problem, &points, &cfg, &mut rng(1)).unwrap();
        let loss = horosvm_loss(&sol, &problem, &points, cfg.c).unwrap();
        let hinge = loss - 0.5 * sol.mu * sol.mu;
        assert!(hinge < 1e-6, "hinge {hinge}");
    }

    #[test]
    fn config_validation() {
        assert!(SplitterConfig::default().validate().is_ok());
        assert!(SplitterConfig { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(SplitterConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(SplitterConfig { c: -1.0, ..Default::default() }.validate().is_err());
    }
}
