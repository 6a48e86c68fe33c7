//! Pairwise distance constraints. A record names a sample pair, a target
//! distance, and a relation; materialization turns records into regression
//! samples, either as index pairs (kernel task, where W itself is the n x n
//! kernel) or as feature differences (Mahalanobis task).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::regression::{residual, DataPoint, Model, Prepared, Relation, Sample};

/// One distance constraint between samples i and j.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRecord {
    pub i: usize,
    pub j: usize,
    pub target: f64,
    pub relation: Relation,
}

/// Realized same-class / cross-class counts of a generated constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassBalance {
    pub same_class: usize,
    pub cross_class: usize,
}

/// A batch of distance constraints plus generation metadata. Sets loaded
/// from files carry no class balance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub records: Vec<ConstraintRecord>,
    pub balance: Option<ClassBalance>,
    pub warnings: Vec<String>,
}

impl ConstraintSet {
    /// Validates records: distinct indices, finite nonnegative targets.
    pub fn new(records: Vec<ConstraintRecord>) -> Result<Self> {
        for (k, rec) in records.iter().enumerate() {
            if rec.i == rec.j {
                return Err(Error::degenerate(format!(
                    "constraint {k} pairs sample {} with itself",
                    rec.i
                )));
            }
            if !(rec.target >= 0.0 && rec.target.is_finite()) {
                return Err(Error::data(format!(
                    "constraint {k} has target {}, expected a finite nonnegative distance",
                    rec.target
                )));
            }
        }
        Ok(ConstraintSet {
            records,
            balance: None,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest sample index referenced, or None for an empty set.
    pub fn max_index(&self) -> Option<usize> {
        self.records.iter().map(|r| r.i.max(r.j)).max()
    }

    /// Kernel-task samples: X = (e_i - e_j)(e_i - e_j)' in dimension n, so
    /// the prediction is the learned kernel distance K_ii + K_jj - 2 K_ij.
    pub fn kernel_samples(&self, n: usize) -> Result<Vec<Sample>> {
        self.records
            .iter()
            .map(|rec| {
                Ok(Sample::new(
                    DataPoint::pair_diff(rec.i, rec.j, n)?,
                    rec.target,
                    rec.relation,
                ))
            })
            .collect()
    }

    /// Mahalanobis-task samples: X = (x_i - x_j)(x_i - x_j)' held as the
    /// rank-one difference vector, so the prediction is the learned
    /// quadratic-form distance.
    pub fn mahalanobis_samples(&self, features: &DMatrix<f64>) -> Result<Vec<Sample>> {
        let n = features.nrows();
        self.records
            .iter()
            .enumerate()
            .map(|(k, rec)| {
                if rec.i >= n || rec.j >= n {
                    return Err(Error::dimension(format!(
                        "constraint {k} references pair ({}, {}) with only {n} samples",
                        rec.i, rec.j
                    )));
                }
                let diff = (features.row(rec.i) - features.row(rec.j)).transpose();
                Ok(Sample::new(
                    DataPoint::rank_one(diff),
                    rec.target,
                    rec.relation,
                ))
            })
            .collect()
    }
}

/// Fraction of samples whose relation already holds at the model: zero
/// hinge residual for bounds, residual within 1e-9 relative for equalities.
pub fn satisfied_fraction(model: &Model, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config(
            "satisfaction fraction needs at least one sample".to_string(),
        ));
    }
    let prepared = Prepared::new(model)?;
    let mut hits = 0usize;
    for sample in samples {
        let y_hat = prepared.predict(&sample.point)?;
        let e = residual(y_hat, sample);
        let ok = match sample.relation {
            Relation::Equality => e.abs() <= 1e-9 * (1.0 + sample.target.abs()),
            _ => e == 0.0,
        };
        if ok {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}
