//! Feature/label container shared by the kernel-learning and metric-learning
//! applications.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// n samples with d features each and integer class ids in [0, classes).
/// The class count is derived as (largest id + 1); a class may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(Error::data(format!(
                "a labeled dataset needs at least 2 samples, got {n}"
            )));
        }
        if labels.len() != n {
            return Err(Error::dimension(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("features contain a non-finite value".to_string()));
        }
        let classes = labels.iter().max().copied().unwrap_or(0) + 1;
        Ok(LabeledDataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires n >= 2
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Feature row i as a column vector.
    pub fn feature_row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    /// Number of distinct labels actually present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}
