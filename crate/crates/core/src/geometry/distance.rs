//! Diagnostics for comparing two models: factor-space closeness measures and
//! matrix Bregman divergences on the full cone.

use nalgebra::DMatrix;

use super::polar::PolarPoint;
use super::spd::{spd_log, spd_sqrt_pair};
use super::stiefel::StiefelPoint;
use crate::error::{Error, Result};

/// Flat closeness D = |G_a - G_b|_F^2 between two factors of equal shape.
pub fn closeness_flat(ga: &DMatrix<f64>, gb: &DMatrix<f64>) -> Result<f64> {
    if ga.shape() != gb.shape() {
        return Err(Error::dimension(format!(
            "factors have shapes {}x{} and {}x{}",
            ga.nrows(),
            ga.ncols(),
            gb.nrows(),
            gb.ncols()
        )));
    }
    Ok((ga - gb).norm_squared())
}

/// Principal angles between the column spans of two frames, computed from the
/// singular values of U_a' U_b clamped into [0, 1].
pub fn principal_angles(ua: &StiefelPoint, ub: &StiefelPoint) -> Result<Vec<f64>> {
    if ua.ambient_dim() != ub.ambient_dim() || ua.rank() != ub.rank() {
        return Err(Error::dimension(
            "frames must share ambient dimension and rank".to_string(),
        ));
    }
    let overlap = ua.matrix().transpose() * ub.matrix();
    let svd = overlap.svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect())
}

/// Polar closeness between two points: a lambda-weighted sum of the squared
/// principal angles between the subspaces and the squared affine-invariant
/// distance |log(R_b^-1 R_a^2 R_b^-1)|_F^2 between the shapes.
pub fn closeness_polar(a: &PolarPoint, b: &PolarPoint, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let angles = principal_angles(a.subspace(), b.subspace())?;
    let subspace_term: f64 = angles.iter().map(|t| t * t).sum();
    let (_, rb_inv) = spd_sqrt_pair(&b.shape().squared())?;
    // R_b^-1 from the eigendecomposition of R_b^2: (R_b^2)^-1/2.
    let inner = &rb_inv * a.shape().squared() * &rb_inv;
    let inner = super::sym(&inner)?;
    let shape_term = spd_log(&inner)?.norm_squared();
    Ok(lambda * subspace_term + (1.0 - lambda) * shape_term)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    /// tr(W Wt^-1) - log det(W Wt^-1) - d
    LogDet,
    /// tr(W log W - W log Wt - W + Wt)
    VonNeumann,
}

/// Matrix Bregman divergence between two SPD matrices.
pub fn divergence(kind: DivergenceKind, w: &DMatrix<f64>, wt: &DMatrix<f64>) -> Result<f64> {
    if w.shape() != wt.shape() {
        return Err(Error::dimension(
            "divergence operands must share dimensions".to_string(),
        ));
    }
    super::check_symmetric(w, "divergence operand")?;
    super::check_symmetric(wt, "divergence operand")?;
    let d = w.nrows() as f64;
    match kind {
        DivergenceKind::LogDet => {
            let chol_t = wt
                .clone()
                .cholesky()
                .ok_or_else(|| Error::domain("reference matrix is singular or indefinite"))?;
            let chol_w = w
                .clone()
                .cholesky()
                .ok_or_else(|| Error::domain("matrix is singular or indefinite"))?;
            let wt_inv = chol_t.inverse();
            let trace = (w * &wt_inv).trace();
            let logdet_w: f64 = chol_w.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            let logdet_t: f64 = chol_t.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            Ok(trace - (logdet_w - logdet_t) - d)
        }
        DivergenceKind::VonNeumann => {
            let log_w = spd_log(w)?;
            let log_t = spd_log(wt)?;
            let term = (w * (log_w - log_t)).trace();
            Ok(term - w.trace() + wt.trace())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{qf, SpdMatrix};
    use nalgebra::DMatrix;

    #[test]
    fn closeness_flat_matches_elementwise_oracle() {
        let ga: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let gb: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 5.0, 1.0]);
        let mut oracle = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                oracle += (ga[(i, j)] - gb[(i, j)]).powi(2);
            }
        }
        assert!((closeness_flat(&ga, &gb).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_lines_have_right_angle() {
        // Spans e1 vs e2 in the plane: one angle of pi/2, closeness at
        // lambda = 1 is pi^2 / 4.
        let e1 = qf(&DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let e2 = qf(&DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let a = PolarPoint::new(e1, SpdMatrix::identity(1)).unwrap();
        let b = PolarPoint::new(e2, SpdMatrix::identity(1)).unwrap();
        let d = closeness_polar(&a, &b, 1.0).unwrap();
        assert!((d - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_points_have_zero_closeness() {
        let u = qf(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        let p = PolarPoint::new(u, SpdMatrix::from_diagonal(&[2.0, 0.5]).unwrap()).unwrap();
        let d = closeness_polar(&p, &p, 0.5).unwrap();
        assert!(d.abs() < 1e-18);
    }

    #[test]
    fn shape_term_matches_scalar_affine_distance() {
        // Same subspace, shapes R_a = 3I vs R_b = I in rank 2:
        // log(R_b^-1 R_a^2 R_b^-1) = ln(9) I, so the shape term is 2 ln(9)^2.
        let u = qf(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        let a = PolarPoint::new(u.clone(), SpdMatrix::from_diagonal(&[3.0, 3.0]).unwrap()).unwrap();
        let b = PolarPoint::new(u, SpdMatrix::identity(2)).unwrap();
        let d = closeness_polar(&a, &b, 0.25).unwrap();
        let expect = 0.75 * 2.0 * (9.0f64.ln()).powi(2);
        assert!((d - expect).abs() < 1e-10);
    }

    #[test]
    fn logdet_divergence_of_scaled_identity() {
        // logdet(aI, I) = d (a - ln a - 1).
        let a = 2.5f64;
        let w = DMatrix::identity(3, 3) * a;
        let i = DMatrix::identity(3, 3);
        let d = divergence(DivergenceKind::LogDet, &w, &i).unwrap();
        assert!((d - 3.0 * (a - a.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn von_neumann_divergence_oracle() {
        // vN(diag(2,1), I) = 2 ln 2 - 1.
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let i = DMatrix::identity(2, 2);
        let d = divergence(DivergenceKind::VonNeumann, &w, &i).unwrap();
        assert!((d - (2.0 * 2.0f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn divergences_vanish_at_equal_arguments_and_reject_singular() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        for kind in [DivergenceKind::LogDet, DivergenceKind::VonNeumann] {
            let d = divergence(kind, &w, &w).unwrap();
            assert!(d.abs() < 1e-12);
        }
        let singular = DMatrix::zeros(2, 2);
        assert!(divergence(DivergenceKind::LogDet, &w, &singular).is_err());
        assert!(divergence(DivergenceKind::VonNeumann, &w, &singular).is_err());
    }
}
