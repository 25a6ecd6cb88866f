//! Data ingestion, synthetic benchmarks, cross-validation and metrics.

mod csv_io;
mod cv;
mod metrics;
mod synth;

pub use csv_io::{load_csv, load_csv_with_warnings, load_unlabeled_csv, save_csv, LoadWarning};
pub use cv::{stratified_kfold, CvPlan};
pub use metrics::{accuracy, aupr, macro_f1, micro_f1};
pub use synth::{generate_synthetic_tree, SyntheticTreeSpec};

use crate::error::{check_dim, invalid, Result};
use crate::hypgeo::PoincarePoint;

/// Labelled points in the Poincaré ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<PoincarePoint>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub name: String,
}

impl Dataset {
    pub fn new(
        points: Vec<PoincarePoint>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(invalid("points and labels differ in length"));
        }
        if let Some(first) = points.first() {
            for p in &points {
                check_dim(first.dim(), p.dim())?;
            }
        }
        if labels.iter().any(|&l| l >= class_names.len()) {
            return Err(invalid("label out of range of class names"));
        }
        Ok(Self {
            points,
            labels,
            class_names,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, PoincarePoint::dim)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows `indices`, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            name: self.name.clone(),
        }
    }

    /// Renumbers classes in order of first appearance, the order a CSV
    /// reload would assign. Unused class names are dropped.
    pub fn canonicalize(&mut self) {
        let mut remap = vec![usize::MAX; self.class_names.len()];
        let mut names = Vec::new();
        for l in &mut self.labels {
            if remap[*l] == usize::MAX {
                remap[*l] = names.len();
                names.push(self.class_names[*l].clone());
            }
            *l = remap[*l];
        }
        self.class_names = names;
    }
}
