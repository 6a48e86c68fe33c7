//! PCA initialization: the top principal directions of the (centered) data,
//! scaled by the square roots of their eigenvalues so that the initial
//! W0 = G0 G0' matches the data's second moments on that subspace.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{sym_eigen, FlatFactor, StiefelPoint};

/// Subspace initialization delivered in every form the geometries take:
/// the orthonormal frame, the scaled factor, and the covariance eigenvalues
/// (descending) behind the scaling.
#[derive(Debug, Clone)]
pub struct SubspaceInit {
    pub subspace: StiefelPoint,
    pub factor: FlatFactor,
    pub eigenvalues: Vec<f64>,
}

/// Top-r eigenpairs of the sample covariance (population convention,
/// divisor n) of the centered features. Fails when the data's numerical
/// rank is below r.
pub fn pca_subspace(features: &DMatrix<f64>, r: usize) -> Result<SubspaceInit> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::data(format!(
            "covariance estimation needs at least 2 rows, got {n}"
        )));
    }
    if r == 0 || r > d.min(n) {
        return Err(Error::config(format!(
            "subspace rank must satisfy 1 <= r <= min(n, d) = {}, got {r}",
            d.min(n)
        )));
    }
    let mut centered = features.clone();
    for j in 0..d {
        let mean = centered.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let cov = centered.tr_mul(&centered) / n as f64;
    let (vals, vecs) = sym_eigen(&cov);

    let top: Vec<f64> = vals.iter().rev().take(r).copied().collect();
    let lead = top[0];
    let tail = top[r - 1];
    if !(tail > 0.0) || tail <= 1e-12 * lead {
        return Err(Error::degenerate(format!(
            "requested rank {r} exceeds the numerical rank of the data \
             (eigenvalue {r} is {tail:.3e} against leading {lead:.3e})"
        )));
    }

    let mut u = DMatrix::zeros(d, r);
    let mut g = DMatrix::zeros(d, r);
    for k in 0..r {
        let src = vecs.column(d - 1 - k);
        let scale = top[k].sqrt();
        for i in 0..d {
            u[(i, k)] = src[i];
            g[(i, k)] = src[i] * scale;
        }
    }
    Ok(SubspaceInit {
        subspace: StiefelPoint::new(u)?,
        factor: FlatFactor::new(g)?,
        eigenvalues: top,
    })
}

/// Eigen-initialization from an already-formed symmetric PSD matrix (for the
/// kernel task, where the matrix itself is the object being learned): top-r
/// eigenpairs of `matrix`, same degeneracy rule as `pca_subspace`.
pub fn spectral_init(matrix: &DMatrix<f64>, r: usize) -> Result<SubspaceInit> {
    let d = matrix.nrows();
    if matrix.ncols() != d {
        return Err(Error::dimension(format!(
            "spectral initialization needs a square matrix, got {}x{}",
            d,
            matrix.ncols()
        )));
    }
    if r == 0 || r > d {
        return Err(Error::config(format!(
            "spectral rank must satisfy 1 <= r <= {d}, got {r}"
        )));
    }
    let (vals, vecs) = sym_eigen(matrix);
    let top: Vec<f64> = vals.iter().rev().take(r).copied().collect();
    let lead = top[0];
    let tail = top[r - 1];
    if !(tail > 0.0) || tail <= 1e-12 * lead.abs() {
        return Err(Error::degenerate(format!(
            "matrix has numerical rank below {r} \
             (eigenvalue {r} is {tail:.3e} against leading {lead:.3e})"
        )));
    }
    let mut u = DMatrix::zeros(d, r);
    let mut g = DMatrix::zeros(d, r);
    for k in 0..r {
        let src = vecs.column(d - 1 - k);
        let scale = top[k].sqrt();
        for i in 0..d {
            u[(i, k)] = src[i];
            g[(i, k)] = src[i] * scale;
        }
    }
    Ok(SubspaceInit {
        subspace: StiefelPoint::new(u)?,
        factor: FlatFactor::new(g)?,
        eigenvalues: top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::principal_angles;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn recovers_a_coordinate_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60;
        let d = 5;
        // Data spans only the first two coordinates.
        let x = DMatrix::from_fn(n, d, |_, j| {
            if j < 2 {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        });
        let init = pca_subspace(&x, 2).unwrap();
        let mut truth = DMatrix::zeros(d, 2);
        truth[(0, 0)] = 1.0;
        truth[(1, 1)] = 1.0;
        // Projection residual measures sin of the largest principal angle
        // without the acos noise floor near zero.
        let u = init.subspace.matrix();
        let residual = (&truth - u * u.tr_mul(&truth)).norm();
        assert!(residual <= 1e-8, "projection residual {residual}");
        let angles =
            principal_angles(&init.subspace, &StiefelPoint::new(truth).unwrap()).unwrap();
        for a in angles {
            assert!(a <= 1e-7, "principal angle {a}");
        }
    }

    #[test]
    fn full_rank_reconstruction_matches_the_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let d = 4;
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let init = pca_subspace(&x, d).unwrap();
        let w0 = init.factor.reconstruct();

        let mut centered = x.clone();
        for j in 0..d {
            let mean = centered.column(j).sum() / n as f64;
            for i in 0..n {
                centered[(i, j)] -= mean;
            }
        }
        let cov = centered.tr_mul(&centered) / n as f64;
        assert!((&w0 - &cov).norm() <= 1e-10 * (1.0 + cov.norm()));

        let u = init.subspace.matrix();
        let gram = u.tr_mul(u);
        assert!((gram - DMatrix::identity(d, d)).norm() <= 1e-12);
    }

    #[test]
    fn eigenvalues_come_out_descending_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(30, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let init = pca_subspace(&x, 3).unwrap();
        assert_eq!(init.eigenvalues.len(), 3);
        assert!(init.eigenvalues[0] >= init.eigenvalues[1]);
        assert!(init.eigenvalues[1] >= init.eigenvalues[2]);
        assert!(init.eigenvalues[2] > 0.0);
    }

    #[test]
    fn degenerate_rank_is_rejected() {
        // Rank-one data cannot supply a two-dimensional subspace.
        let x = DMatrix::from_fn(20, 3, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
        assert!(pca_subspace(&x, 2).is_err());
        assert!(pca_subspace(&x, 1).is_ok());
        assert!(pca_subspace(&x, 0).is_err());
        assert!(pca_subspace(&x, 4).is_err());
    }

    #[test]
    fn spectral_init_diagonal_oracle() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[
            4.0, 1.0, 9.0,
        ]));
        let init = spectral_init(&m, 2).unwrap();
        assert_eq!(init.eigenvalues, vec![9.0, 4.0]);
        // Leading directions are e3 and e1 up to sign.
        let u = init.subspace.matrix();
        assert!(u[(2, 0)].abs() > 1.0 - 1e-12);
        assert!(u[(0, 1)].abs() > 1.0 - 1e-12);
        assert!(spectral_init(&m, 4).is_err());
    }
}
