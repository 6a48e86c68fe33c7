//! Flat quotient parametrization of the rank-r PSD matrices: W = G G' with
//! G a full-column-rank d x r matrix, unique up to G -> G O for O in O(r).
//! The quotient metric is the Frobenius inner product on factors, so updates
//! are straight lines in G.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative gap between smallest and largest singular value below which the
/// factor is declared rank-deficient.
pub const FLAT_RANK_TOL: f64 = 1e-12;

/// A full-column-rank factor G with W = G G'.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatFactor {
    mat: DMatrix<f64>,
}

impl FlatFactor {
    /// Validates shape and full column rank (singular value gap 1e-12).
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let (d, r) = mat.shape();
        if r == 0 || r > d {
            return Err(Error::dimension(format!(
                "flat factor needs 1 <= r <= d, got d={d}, r={r}"
            )));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::degenerate("factor contains non-finite entries"));
        }
        let svd = mat.clone().svd(false, false);
        let max = svd
            .singular_values
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
        let min = svd
            .singular_values
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        if max == 0.0 || min <= FLAT_RANK_TOL * max {
            return Err(Error::degenerate(format!(
                "factor is rank-deficient (sigma_min/sigma_max = {:.3e})",
                if max == 0.0 { 0.0 } else { min / max }
            )));
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn ambient_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn rank(&self) -> usize {
        self.mat.ncols()
    }

    /// Dense W = G G'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let w = &self.mat * self.mat.transpose();
        crate::geometry::sym(&w).expect("square product")
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruct_is_psd_of_rank_r() {
        let g = FlatFactor::new(DMatrix::from_row_slice(3, 2, &[
            1.0, 0.0, //
            0.5, 2.0, //
            0.0, 1.0,
        ]))
        .unwrap();
        let w = g.reconstruct();
        assert_eq!(w, w.transpose());
        let (vals, _) = crate::geometry::sym_eigen(&w);
        assert!(vals[0].abs() < 1e-12); // d - r = 1 zero eigenvalue
        assert!(vals[1] > 1e-6 && vals[2] > 1e-6);
    }

    #[test]
    fn rejects_rank_deficient() {
        let g = DMatrix::from_row_slice(3, 2, &[
            1.0, 2.0, //
            2.0, 4.0, //
            3.0, 6.0,
        ]);
        assert!(matches!(FlatFactor::new(g), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_wide_matrices() {
        let g = DMatrix::zeros(2, 3);
        assert!(matches!(FlatFactor::new(g), Err(Error::Dimension(_))));
    }
}
