//! The cone C(d) of symmetric positive-definite matrices, matrix exp/log
//! between the cone and the symmetric matrices, and the two cone update maps:
//! the affine-invariant exponential and the log-Euclidean retraction.

use nalgebra::DMatrix;

use super::{check_square, check_symmetric, rebuild_sym, sym, sym_eigen, SymmetricMatrix};
use crate::error::{Error, Result};

/// Relative eigenvalue tolerance for positivity checks in spd_log and the
/// square-root maps: an eigenvalue <= 1e-12 * max is treated as zero.
pub const SPD_EIG_TOL: f64 = 1e-12;

/// Largest exponent fed to exp() before declaring overflow.
const EXP_OVERFLOW: f64 = 700.0;

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness (via Cholesky).
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&mat, "spd matrix")?;
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("spd matrix contains non-finite entries"));
        }
        let symmetrized = sym(&mat)?;
        if symmetrized.clone().cholesky().is_none() {
            return Err(Error::domain("matrix is not positive definite"));
        }
        Ok(Self { mat: symmetrized })
    }

    pub(crate) fn new_unchecked(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::domain("diagonal entries must be positive"));
        }
        let n = values.len();
        let mut mat = DMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            mat[(i, i)] = v;
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// The square P * P, symmetrized.
    pub fn squared(&self) -> DMatrix<f64> {
        sym(&(&self.mat * &self.mat)).expect("square product")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = sym_eigen(&self.mat);
        vals[0]
    }
}

/// Matrix exponential of a symmetric matrix; the result is SPD.
pub fn spd_exp(s: &SymmetricMatrix) -> Result<SpdMatrix> {
    let (w, _, _) = spd_exp_parts(s)?;
    Ok(SpdMatrix::new_unchecked(w))
}

/// exp(S) together with the eigendecomposition of S it was built from, for
/// callers that also need the chain-rule factor through the exponential.
pub(crate) fn spd_exp_parts(
    s: &SymmetricMatrix,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    check_symmetric(s, "spd_exp input")?;
    let (vals, vecs) = sym_eigen(s);
    if vals.iter().any(|&v| !v.is_finite()) {
        return Err(Error::numerical("non-finite eigenvalue in spd_exp"));
    }
    if vals.iter().any(|&v| v > EXP_OVERFLOW) {
        return Err(Error::numerical(format!(
            "spd_exp overflow: eigenvalue {:.3e}",
            vals.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let w = rebuild_sym(&vals, &vecs, f64::exp);
    Ok((w, vals, vecs))
}

/// Frechet derivative of the matrix exponential at a symmetric point with
/// eigendecomposition (vals, vecs), applied to the symmetric direction `a`:
/// V (Phi .* (V' A V)) V', where Phi_ij is the divided difference of exp at
/// (vals_i, vals_j). Self-adjoint in the Frobenius inner product, so it is
/// both the pushforward of tangents and the pullback of gradients.
pub(crate) fn dexp_sym(
    vals: &[f64],
    vecs: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> Result<SymmetricMatrix> {
    check_symmetric(a, "dexp_sym direction")?;
    let mut m = sym(&(vecs.tr_mul(a) * vecs))?;
    for i in 0..vals.len() {
        for j in 0..vals.len() {
            m[(i, j)] *= exp_divided_difference(vals[i], vals[j]);
        }
    }
    sym(&(vecs * m * vecs.transpose()))
}

/// (e^a - e^b)/(a - b), continued by e^a at a = b, evaluated in the stable
/// form e^((a+b)/2) sinh(h)/h with h = (a-b)/2.
fn exp_divided_difference(a: f64, b: f64) -> f64 {
    let h = 0.5 * (a - b);
    let mid = 0.5 * (a + b);
    mid.exp() * sinch(h)
}

/// sinh(h)/h with a series fallback near zero.
fn sinch(h: f64) -> f64 {
    if h.abs() < 1e-5 {
        let h2 = h * h;
        1.0 + h2 / 6.0 * (1.0 + h2 / 20.0)
    } else {
        h.sinh() / h
    }
}

/// Matrix logarithm of an SPD matrix given as a dense symmetric matrix.
/// Errors if any eigenvalue is within 1e-12 (relative) of zero or negative.
pub fn spd_log(p: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    check_symmetric(p, "spd_log input")?;
    let (vals, vecs) = sym_eigen(p);
    let max = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 || vals[0] <= SPD_EIG_TOL * max {
        return Err(Error::domain(format!(
            "spd_log domain: min eigenvalue {:.3e}, max {:.3e}",
            vals[0], max
        )));
    }
    Ok(rebuild_sym(&vals, &vecs, f64::ln))
}

/// SPD square root of a symmetric positive-definite matrix.
pub fn spd_sqrt(p: &DMatrix<f64>) -> Result<SpdMatrix> {
    check_symmetric(p, "spd_sqrt input")?;
    let (vals, vecs) = sym_eigen(p);
    let max = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 || vals[0] <= SPD_EIG_TOL * max {
        return Err(Error::domain(format!(
            "spd_sqrt domain: min eigenvalue {:.3e}, max {:.3e}",
            vals[0], max
        )));
    }
    Ok(SpdMatrix::new_unchecked(rebuild_sym(
        &vals,
        &vecs,
        f64::sqrt,
    )))
}

/// Both W^(1/2) and W^(-1/2) from one eigendecomposition.
pub(crate) fn spd_sqrt_pair(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_square(w, "spd matrix")?;
    let (vals, vecs) = sym_eigen(w);
    let max = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 || vals[0] <= SPD_EIG_TOL * max {
        return Err(Error::domain(format!(
            "matrix is not positive definite (min eigenvalue {:.3e})",
            vals[0]
        )));
    }
    let half = rebuild_sym(&vals, &vecs, f64::sqrt);
    let inv_half = rebuild_sym(&vals, &vecs, |v| 1.0 / v.sqrt());
    Ok((half, inv_half))
}

/// Exponential map of the affine-invariant cone geometry:
/// Exp_W(xi) = W^(1/2) exp(W^(-1/2) xi W^(-1/2)) W^(1/2).
pub fn cone_affine_exp(w: &SpdMatrix, xi: &SymmetricMatrix) -> Result<SpdMatrix> {
    if xi.shape() != w.matrix().shape() {
        return Err(Error::dimension(
            "tangent dimension does not match the base point".to_string(),
        ));
    }
    if xi.iter().all(|v| *v == 0.0) {
        return Ok(w.clone());
    }
    let (half, inv_half) = spd_sqrt_pair(w.matrix())?;
    let inner = sym(&(&inv_half * xi * &inv_half))?;
    let e = spd_exp(&inner)?;
    let out = sym(&(&half * e.matrix() * &half))?;
    Ok(SpdMatrix::new_unchecked(out))
}

/// Log-Euclidean retraction: R_W(s xi) = exp(log W + s xi). The cone is flat
/// in log coordinates, so the update is a straight line in S = log W.
pub fn cone_logeuclidean_retract(
    w: &SpdMatrix,
    xi: &SymmetricMatrix,
    s: f64,
) -> Result<SpdMatrix> {
    if xi.shape() != w.matrix().shape() {
        return Err(Error::dimension(
            "tangent dimension does not match the base point".to_string(),
        ));
    }
    let log_w = spd_log(w.matrix())?;
    spd_exp(&(log_w + xi * s))
}
