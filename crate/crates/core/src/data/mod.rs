//! Node-classification datasets: the in-memory type, the text file format,
//! split validation and a synthetic block-model generator.

mod format;
mod sbm;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use format::{load_dataset, load_dataset_with, parse_dataset, write_dataset, LoadOptions, LoadReport, FORMAT_MAGIC};
pub use sbm::{expected_edge_stats, generate_sbm, generate_sbm_with, SbmConfig, Signal};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    graph: Graph,
    features: Array2<f64>,
    labels: Vec<i64>,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    test_idx: Vec<usize>,
    num_classes: usize,
    /// Vertices that had no edge in the source and received a unit self-loop.
    repaired: Vec<usize>,
}

impl Dataset {
    /// Checks shapes, label ranges and split disjointness.
    pub fn new(
        graph: Graph,
        features: Array2<f64>,
        labels: Vec<i64>,
        train_idx: Vec<usize>,
        val_idx: Vec<usize>,
        test_idx: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let d = Dataset {
            graph,
            features,
            labels,
            train_idx,
            val_idx,
            test_idx,
            num_classes,
            repaired: Vec::new(),
        };
        d.check()?;
        Ok(d)
    }

    pub(crate) fn with_repaired(mut self, repaired: Vec<usize>) -> Self {
        self.repaired = repaired;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.features.nrows(),
            });
        }
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.labels.len(),
            });
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one class".into()));
        }
        for (node, &label) in self.labels.iter().enumerate() {
            if label < -1 || label >= self.num_classes as i64 {
                return Err(Error::LabelOutOfRange {
                    node,
                    label,
                    num_classes: self.num_classes,
                });
            }
        }
        let mut seen = vec![false; n];
        for &node in self.train_idx.iter().chain(&self.val_idx).chain(&self.test_idx) {
            if node >= n {
                return Err(Error::IndexOutOfRange { index: node, len: n });
            }
            if std::mem::replace(&mut seen[node], true) {
                return Err(Error::SplitOverlap { node });
            }
            if self.labels[node] < 0 {
                return Err(Error::LabelOutOfRange {
                    node,
                    label: -1,
                    num_classes: self.num_classes,
                });
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn train_idx(&self) -> &[usize] {
        &self.train_idx
    }

    pub fn val_idx(&self) -> &[usize] {
        &self.val_idx
    }

    pub fn test_idx(&self) -> &[usize] {
        &self.test_idx
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn repaired_vertices(&self) -> &[usize] {
        &self.repaired
    }

    /// Scales each feature row to unit sum; all-zero rows stay zero.
    pub fn row_normalize_features(&mut self) {
        for mut row in self.features.rows_mut() {
            let s: f64 = row.sum();
            if s != 0.0 {
                row /= s;
            }
        }
    }

    /// Same dataset with features replaced (same row count).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        let mut d = self.clone();
        d.features = features;
        d.check()?;
        Ok(d)
    }
}

/// Published statistics of a standard citation dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceStats {
    pub name: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub classes: usize,
    pub features: usize,
    pub label_rate: f64,
}

pub const REFERENCE_DATASETS: [ReferenceStats; 3] = [
    ReferenceStats {
        name: "pubmed",
        nodes: 19717,
        edges: 44338,
        classes: 3,
        features: 500,
        label_rate: 0.003,
    },
    ReferenceStats {
        name: "citeseer",
        nodes: 3327,
        edges: 4732,
        classes: 6,
        features: 3703,
        label_rate: 0.036,
    },
    ReferenceStats {
        name: "cora",
        nodes: 2708,
        edges: 5429,
        classes: 7,
        features: 1433,
        label_rate: 0.052,
    },
];

/// Planetoid-protocol validation split size.
pub const STANDARD_VAL_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub num_nodes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub label_rate: f64,
    /// Reference dataset with the same node, feature and class counts, if any.
    pub reference: Option<ReferenceStats>,
    /// Label rate equals the reference after rounding to three decimals.
    pub label_rate_matches: Option<bool>,
    pub standard_val_size: bool,
}

/// Re-checks the dataset invariants, rejects empty splits and compares the
/// label rate with the matching reference dataset.
pub fn validate_splits(d: &Dataset) -> Result<SplitReport> {
    d.check()?;
    for (name, idx) in [("train", &d.train_idx), ("val", &d.val_idx), ("test", &d.test_idx)] {
        if idx.is_empty() {
            return Err(Error::EmptySplit(name));
        }
    }
    let n = d.num_nodes();
    let label_rate = d.train_idx.len() as f64 / n as f64;
    let reference = REFERENCE_DATASETS
        .iter()
        .find(|r| r.nodes == n && r.features == d.num_features() && r.classes == d.num_classes)
        .copied();
    Ok(SplitReport {
        num_nodes: n,
        train: d.train_idx.len(),
        val: d.val_idx.len(),
        test: d.test_idx.len(),
        label_rate,
        label_rate_matches: reference.map(|r| ((label_rate * 1000.0).round() - r.label_rate * 1000.0).abs() < 0.5),
        reference,
        standard_val_size: d.val_idx.len() == STANDARD_VAL_SIZE,
    })
}
