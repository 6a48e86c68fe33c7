//! Observations for trace regression y ~ tr(W X). Inputs X are symmetric and
//! enter only through tr(W X), so three representations are supported: dense
//! symmetric matrices, rank-one x x', and index pairs (e_i - e_j)(e_i - e_j)'
//! which never materialize a d x d matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::sym;

#[derive(Debug, Clone, PartialEq)]
pub enum DataPoint {
    /// Dense symmetric X (symmetrized on construction).
    Dense(DMatrix<f64>),
    /// X = x x'.
    RankOne(DVector<f64>),
    /// X = (e_i - e_j)(e_i - e_j)' in ambient dimension n.
    PairDiff { i: usize, j: usize, n: usize },
}

impl DataPoint {
    pub fn dense(x: DMatrix<f64>) -> Result<Self> {
        Ok(DataPoint::Dense(sym(&x)?))
    }

    pub fn rank_one(x: DVector<f64>) -> Self {
        DataPoint::RankOne(x)
    }

    pub fn pair_diff(i: usize, j: usize, n: usize) -> Result<Self> {
        if i == j {
            return Err(Error::degenerate(format!(
                "pair difference needs distinct indices, got ({i}, {j})"
            )));
        }
        if i >= n || j >= n {
            return Err(Error::dimension(format!(
                "pair indices ({i}, {j}) out of range for ambient dimension {n}"
            )));
        }
        Ok(DataPoint::PairDiff { i, j, n })
    }

    /// Ambient dimension the point lives in.
    pub fn dim(&self) -> usize {
        match self {
            DataPoint::Dense(x) => x.nrows(),
            DataPoint::RankOne(x) => x.len(),
            DataPoint::PairDiff { n, .. } => *n,
        }
    }
}

/// How a prediction is compared against the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Squared error on yhat - y.
    Equality,
    /// Penalize only yhat > y.
    UpperBound,
    /// Penalize only yhat < y.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: DataPoint,
    pub target: f64,
    pub relation: Relation,
}

impl Sample {
    pub fn equality(point: DataPoint, target: f64) -> Self {
        Sample {
            point,
            target,
            relation: Relation::Equality,
        }
    }

    pub fn new(point: DataPoint, target: f64, relation: Relation) -> Self {
        Sample {
            point,
            target,
            relation,
        }
    }
}

/// Signed residual that drives both the loss and the gradients: yhat - y for
/// equalities and for violated inequalities, zero for satisfied ones.
pub fn residual(y_hat: f64, sample: &Sample) -> f64 {
    let e = y_hat - sample.target;
    match sample.relation {
        Relation::Equality => e,
        Relation::UpperBound => {
            if e > 0.0 {
                e
            } else {
                0.0
            }
        }
        Relation::LowerBound => {
            if e < 0.0 {
                e
            } else {
                0.0
            }
        }
    }
}

/// Pointwise loss (1/2) residual^2.
pub fn loss(y_hat: f64, sample: &Sample) -> f64 {
    let r = residual(y_hat, sample);
    0.5 * r * r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(relation: Relation, target: f64) -> Sample {
        Sample::new(DataPoint::rank_one(DVector::zeros(1)), target, relation)
    }

    #[test]
    fn satisfied_upper_bound_has_zero_loss() {
        let s = sample(Relation::UpperBound, 3.0);
        assert_eq!(loss(2.0, &s), 0.0);
        assert_eq!(residual(2.0, &s), 0.0);
    }

    #[test]
    fn violated_upper_bound_penalizes_excess() {
        let s = sample(Relation::UpperBound, 3.0);
        assert_eq!(loss(4.0, &s), 0.5);
        assert_eq!(residual(4.0, &s), 1.0);
    }

    #[test]
    fn lower_bound_mirrors_upper_bound() {
        let s = sample(Relation::LowerBound, 3.0);
        assert_eq!(loss(4.0, &s), 0.0);
        assert_eq!(loss(2.0, &s), 0.5);
        assert_eq!(residual(2.0, &s), -1.0);
    }

    #[test]
    fn equality_loss_is_half_square() {
        let s = sample(Relation::Equality, 1.0);
        assert_eq!(loss(3.0, &s), 2.0);
        assert_eq!(residual(3.0, &s), 2.0);
    }

    #[test]
    fn boundary_case_is_satisfied() {
        let up = sample(Relation::UpperBound, 3.0);
        let lo = sample(Relation::LowerBound, 3.0);
        assert_eq!(loss(3.0, &up), 0.0);
        assert_eq!(loss(3.0, &lo), 0.0);
    }

    #[test]
    fn pair_diff_validates_indices() {
        assert!(DataPoint::pair_diff(1, 1, 4).is_err());
        assert!(DataPoint::pair_diff(0, 4, 4).is_err());
        assert!(DataPoint::pair_diff(0, 3, 4).is_ok());
    }

    #[test]
    fn dense_constructor_symmetrizes() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 4.0, 0.0]);
        let p = DataPoint::dense(x).unwrap();
        match p {
            DataPoint::Dense(m) => {
                assert_eq!(m[(0, 1)], 3.0);
                assert_eq!(m[(1, 0)], 3.0);
            }
            _ => unreachable!(),
        }
    }
}
