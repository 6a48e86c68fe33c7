//! The Stiefel manifold St(r, d) of d x r orthonormal frames and the
//! Grassmann quotient Gr(r, d) = St(r, d) / O(r) of r-dimensional subspaces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Orthonormality tolerance |U'U - I|_F enforced on construction.
pub const STIEFEL_TOL: f64 = 1e-10;

/// Relative tolerance on the diagonal of the QR factor below which a column
/// is considered numerically dependent.
const QF_RANK_TOL: f64 = 1e-12;

/// A point on St(r, d): a d x r matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    mat: DMatrix<f64>,
}

impl StiefelPoint {
    /// Validates |U'U - I|_F <= 1e-10.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let (d, r) = mat.shape();
        if r == 0 || r > d {
            return Err(Error::dimension(format!(
                "stiefel point needs 1 <= r <= d, got d={d}, r={r}"
            )));
        }
        let gram = mat.transpose() * &mat;
        let mut err = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                err += (gram[(i, j)] - target).powi(2);
            }
        }
        if err.sqrt() > STIEFEL_TOL {
            return Err(Error::degenerate(format!(
                "columns are not orthonormal (|U'U - I| = {:.3e})",
                err.sqrt()
            )));
        }
        Ok(Self { mat })
    }

    pub(crate) fn new_unchecked(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Ambient dimension d.
    pub fn ambient_dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Subspace dimension r.
    pub fn rank(&self) -> usize {
        self.mat.ncols()
    }
}

/// Orthonormal factor of the thin QR decomposition, with the sign convention
/// that the triangular factor has a positive diagonal. This makes qf unique
/// and equivariant: qf(O A) = O qf(A) for orthogonal O.
pub fn qf(a: &DMatrix<f64>) -> Result<StiefelPoint> {
    let (d, r) = a.shape();
    if r == 0 || r > d {
        return Err(Error::dimension(format!(
            "qf needs a tall matrix with 1 <= r <= d, got {d}x{r}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("qf input contains non-finite entries"));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let rmat = qr.r();
    let max_diag = rmat
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_diag == 0.0 {
        return Err(Error::degenerate("qf of the zero matrix"));
    }
    for j in 0..r {
        let rjj = rmat[(j, j)];
        if rjj.abs() <= QF_RANK_TOL * max_diag {
            return Err(Error::degenerate(format!(
                "rank-deficient input to qf (column {j})"
            )));
        }
        if rjj < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(StiefelPoint::new_unchecked(q))
}

/// Projection of an ambient direction onto the horizontal space at U:
/// (I - U U') D, the tangent space of the Grassmann quotient.
pub fn grassmann_project(u: &StiefelPoint, dir: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if dir.shape() != u.matrix().shape() {
        return Err(Error::dimension(format!(
            "direction is {}x{}, point is {}x{}",
            dir.nrows(),
            dir.ncols(),
            u.ambient_dim(),
            u.rank()
        )));
    }
    let coeff = u.matrix().transpose() * dir;
    Ok(dir - u.matrix() * coeff)
}

/// Geodesic of the Grassmann quotient: with the thin SVD xi = Z S V', the
/// exponential is Exp_U(s xi) = U V cos(s S) V' + Z sin(s S) V'.
pub fn grassmann_exp(u: &StiefelPoint, xi: &DMatrix<f64>, s: f64) -> Result<StiefelPoint> {
    if xi.shape() != u.matrix().shape() {
        return Err(Error::dimension(
            "tangent shape does not match the base point".to_string(),
        ));
    }
    if s == 0.0 || xi.iter().all(|v| *v == 0.0) {
        return Ok(u.clone());
    }
    let r = u.rank();
    let svd = xi.clone().svd(true, true);
    let z = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let v = vt.transpose();
    let mut cos_d = DMatrix::zeros(r, r);
    let mut sin_d = DMatrix::zeros(r, r);
    for k in 0..r {
        let angle = s * svd.singular_values[k];
        cos_d[(k, k)] = angle.cos();
        sin_d[(k, k)] = angle.sin();
    }
    let out = u.matrix() * (&v * &cos_d * vt) + z * (&sin_d * vt);
    Ok(StiefelPoint::new_unchecked(out))
}

/// First-order retraction on the Grassmann quotient: qf(U + s xi). Agrees
/// with [`grassmann_exp`] to second order in s.
pub fn grassmann_retract_qf(u: &StiefelPoint, xi: &DMatrix<f64>, s: f64) -> Result<StiefelPoint> {
    if xi.shape() != u.matrix().shape() {
        return Err(Error::dimension(
            "tangent shape does not match the base point".to_string(),
        ));
    }
    if s == 0.0 || xi.iter().all(|v| *v == 0.0) {
        return Ok(u.clone());
    }
    qf(&(u.matrix() + xi * s))
}
