//! Matrix manifolds used as search spaces: the Stiefel/Grassmann quotient,
//! the cone of symmetric positive-definite matrices, and two parametrizations
//! of the rank-r positive-semidefinite matrices W (the flat factorization
//! W = G G' and the polar factorization W = U R^2 U').

mod distance;
mod flat;
mod metric;
mod polar;
mod spd;
mod stiefel;

pub use distance::{
    closeness_flat, closeness_polar, divergence, principal_angles, DivergenceKind,
};
pub use flat::FlatFactor;
pub use metric::{
    affine_inner, affine_norm, flat_norm, frobenius_inner, logeuclidean_norm, polar_inner,
    polar_norm,
};
pub use polar::{polar_retract, PolarPoint, PolarTangent};
pub use spd::{
    cone_affine_exp, cone_logeuclidean_retract, spd_exp, spd_log, spd_sqrt, SpdMatrix,
};
pub(crate) use spd::{dexp_sym, spd_exp_parts};
pub use stiefel::{grassmann_exp, grassmann_project, grassmann_retract_qf, qf, StiefelPoint};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A dense symmetric matrix. Symmetry is maintained by constructing values
/// through [`sym`] and by symmetrizing reconstruction products.
pub type SymmetricMatrix = DMatrix<f64>;

/// Symmetric part (B + B') / 2. Idempotent in floating point: applying it to
/// an already symmetric matrix reproduces the entries bit for bit.
pub fn sym(b: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    if b.nrows() != b.ncols() {
        return Err(Error::dimension(format!(
            "sym expects a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            out[(i, j)] = 0.5 * (b[(i, j)] + b[(j, i)]);
        }
    }
    Ok(out)
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Rebuild Q f(D) Q' from an eigendecomposition and symmetrize the product to
/// remove the roundoff asymmetry of the triple matrix product.
pub(crate) fn rebuild_sym(
    values: &[f64],
    vectors: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (col, &v) in values.iter().enumerate() {
        let fv = f(v);
        for row in 0..n {
            scaled[(row, col)] *= fv;
        }
    }
    let prod = &scaled * vectors.transpose();
    // sym() on a square product cannot fail.
    sym(&prod).expect("square product")
}

pub(crate) fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(m, what)?;
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::domain(format!(
                    "{what} is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_matches_elementwise_oracle() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let s = sym(&b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = 0.5 * (b[(i, j)] + b[(j, i)]);
                assert_eq!(s[(i, j)], expect);
            }
        }
    }

    #[test]
    fn sym_is_bitwise_idempotent() {
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.7, -2.3, 4.0]);
        let s = sym(&b).unwrap();
        let ss = sym(&s).unwrap();
        for (a, b) in s.iter().zip(ss.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sym_rejects_rectangular() {
        let b = DMatrix::zeros(2, 3);
        assert!(matches!(sym(&b), Err(Error::Dimension(_))));
    }

    #[test]
    fn sym_eigen_sorts_ascending() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let (vals, _) = sym_eigen(&m);
        assert!(vals[0] <= vals[1]);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
    }
}
