//! Metric norms of tangent directions for each geometry. The polar norm of a
//! direction (xi_u, H) is sqrt((1/lambda) |xi_u|_F^2 + (1/(1-lambda)) |H|_F^2):
//! with xi_r2 = R H R the affine-invariant term tr(xi_r2 R^-2 xi_r2 R^-2)
//! collapses to |H|_F^2, so no inversion is needed.

use nalgebra::DMatrix;

use super::spd::{spd_sqrt_pair, SpdMatrix};
use crate::error::{Error, Result};

/// Frobenius norm, the flat quotient metric.
pub fn flat_norm(xi: &DMatrix<f64>) -> f64 {
    xi.norm()
}

/// Frobenius inner product, the pairing for the flat and log-Euclidean
/// metrics.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Affine-invariant norm at W: sqrt(tr(xi W^-1 xi W^-1)) = |W^-1/2 xi W^-1/2|_F.
pub fn affine_norm(w: &SpdMatrix, xi: &DMatrix<f64>) -> Result<f64> {
    if xi.shape() != w.matrix().shape() {
        return Err(Error::dimension(
            "tangent dimension does not match the base point".to_string(),
        ));
    }
    let (_, inv_half) = spd_sqrt_pair(w.matrix())?;
    Ok((&inv_half * xi * &inv_half).norm())
}

/// Affine-invariant inner product at W: tr(W^-1 a W^-1 b).
pub fn affine_inner(w: &SpdMatrix, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != w.matrix().shape() || b.shape() != w.matrix().shape() {
        return Err(Error::dimension(
            "tangent dimension does not match the base point".to_string(),
        ));
    }
    let (_, inv_half) = spd_sqrt_pair(w.matrix())?;
    let left = &inv_half * a * &inv_half;
    let right = &inv_half * b * &inv_half;
    Ok(left.dot(&right))
}

/// Log-Euclidean norm: Frobenius in log coordinates.
pub fn logeuclidean_norm(xi: &DMatrix<f64>) -> f64 {
    xi.norm()
}

/// Polar metric norm of the direction pair (xi_u, H) with weight lambda on
/// the subspace term and 1 - lambda on the shape term.
///
/// At the endpoints the complementary component is frozen: lambda = 0 demands
/// xi_u = 0 and lambda = 1 demands H = 0; a nonzero frozen component is a
/// configuration error.
pub fn polar_norm(lambda: f64, xi_u: &DMatrix<f64>, exponent: &DMatrix<f64>) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let u_sq = xi_u.norm_squared();
    let h_sq = exponent.norm_squared();
    if lambda == 0.0 {
        if u_sq != 0.0 {
            return Err(Error::config(
                "lambda = 0 freezes the subspace, but xi_u is nonzero".to_string(),
            ));
        }
        return Ok(h_sq.sqrt());
    }
    if lambda == 1.0 {
        if h_sq != 0.0 {
            return Err(Error::config(
                "lambda = 1 freezes the shape, but the exponent is nonzero".to_string(),
            ));
        }
        return Ok(u_sq.sqrt());
    }
    Ok((u_sq / lambda + h_sq / (1.0 - lambda)).sqrt())
}

/// Polar metric inner product of two direction pairs,
/// (1/lambda) tr(a_u' b_u) + (1/(1-lambda)) tr(a_h b_h), with the same
/// endpoint freezing rules as [`polar_norm`].
pub fn polar_inner(
    lambda: f64,
    a: (&DMatrix<f64>, &DMatrix<f64>),
    b: (&DMatrix<f64>, &DMatrix<f64>),
) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let (au, ah) = a;
    let (bu, bh) = b;
    let u_term = au.dot(bu);
    let h_term = ah.dot(bh);
    if lambda == 0.0 {
        if au.iter().any(|v| *v != 0.0) || bu.iter().any(|v| *v != 0.0) {
            return Err(Error::config(
                "lambda = 0 freezes the subspace, but a subspace part is nonzero".to_string(),
            ));
        }
        return Ok(h_term);
    }
    if lambda == 1.0 {
        if ah.iter().any(|v| *v != 0.0) || bh.iter().any(|v| *v != 0.0) {
            return Err(Error::config(
                "lambda = 1 freezes the shape, but a shape part is nonzero".to_string(),
            ));
        }
        return Ok(u_term);
    }
    Ok(u_term / lambda + h_term / (1.0 - lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sym, SpdMatrix};
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn affine_norm_matches_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w_mat = sym(&(&a * a.transpose() / 4.0)).unwrap() + DMatrix::identity(4, 4);
        let w = SpdMatrix::new(w_mat.clone()).unwrap();
        let xi = sym(&DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap();
        let norm = affine_norm(&w, &xi).unwrap();
        let w_inv = w_mat.try_inverse().unwrap();
        let prod = &xi * &w_inv * &xi * &w_inv;
        assert!((norm * norm - prod.trace()).abs() < 1e-10);
    }

    #[test]
    fn affine_norm_is_scale_invariant() {
        // |mu xi| at mu W equals |xi| at W.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w_mat = sym(&(&a * a.transpose())).unwrap() + DMatrix::identity(3, 3);
        let xi = sym(&DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap();
        let n1 = affine_norm(&SpdMatrix::new(w_mat.clone()).unwrap(), &xi).unwrap();
        let n2 = affine_norm(&SpdMatrix::new(&w_mat * 7.0).unwrap(), &(&xi * 7.0)).unwrap();
        assert!((n1 - n2).abs() < 1e-9 * (1.0 + n1));
    }

    #[test]
    fn polar_norm_halves_weight_at_half_lambda() {
        // At lambda = 0.5 both weights are 2: norm^2 = 2 |xi_u|^2 + 2 |H|^2.
        let xi_u = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 0.0]);
        let h = DMatrix::from_row_slice(1, 1, &[3.0]);
        let n = polar_norm(0.5, &xi_u, &h).unwrap();
        let expect = (2.0 * 5.0 + 2.0 * 9.0f64).sqrt();
        assert!((n - expect).abs() < 1e-14);
    }

    #[test]
    fn polar_norm_endpoint_rules() {
        let zero31 = DMatrix::zeros(3, 1);
        let zero11 = DMatrix::zeros(1, 1);
        let xi_u = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let h = DMatrix::from_row_slice(1, 1, &[2.0]);
        assert!((polar_norm(0.0, &zero31, &h).unwrap() - 2.0).abs() < 1e-15);
        assert!((polar_norm(1.0, &xi_u, &zero11).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            polar_norm(0.0, &xi_u, &h),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            polar_norm(1.0, &zero31, &h),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            polar_norm(1.5, &zero31, &zero11),
            Err(Error::Config(_))
        ));
    }
}
