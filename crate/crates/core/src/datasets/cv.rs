use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Fold assignment for stratified k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    pub fold_assignments: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    /// `(train, test)` indices for `fold`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_assignments.len()).partition(|&i| self.fold_assignments[i] != fold)
    }
}

/// Shuffles each class with a seeded stream and deals its members to folds
/// round-robin, continuing the rotation across classes so fold sizes stay
/// balanced too.
pub fn stratified_kfold(labels: &[usize], n_folds: usize, seed: u64) -> Result<CvPlan> {
    if n_folds < 2 {
        return Err(invalid(format!("need at least 2 folds, got {n_folds}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_assignments = vec![0; labels.len()];
    let mut next = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < n_folds {
            warn!(
                "class {class} has {} members, fewer than {n_folds} folds",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for i in members {
            fold_assignments[i] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(CvPlan {
        n_folds,
        fold_assignments,
        seed,
    })
}
