//! Polar quotient parametrization of the rank-r PSD matrices:
//! W = U R^2 U' with U in St(r, d) and R in C(r), unique up to
//! (U, R) -> (U O, O' R O). The metric blends a Grassmann term on U
//! (weight 1/lambda) and an affine-invariant term on R^2 (weight
//! 1/(1 - lambda)).

use nalgebra::DMatrix;

use super::spd::{spd_exp, spd_sqrt, SpdMatrix};
use super::stiefel::{qf, StiefelPoint};
use super::sym;
use crate::error::{Error, Result};

/// A point W = U R^2 U' of the polar geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPoint {
    u: StiefelPoint,
    r: SpdMatrix,
}

impl PolarPoint {
    pub fn new(u: StiefelPoint, r: SpdMatrix) -> Result<Self> {
        if r.dim() != u.rank() {
            return Err(Error::dimension(format!(
                "shape factor is {}x{} but the subspace has rank {}",
                r.dim(),
                r.dim(),
                u.rank()
            )));
        }
        Ok(Self { u, r })
    }

    /// Canonical polar representative of a flat factor: with the thin SVD
    /// G = Z S V', the subspace is U = Z V' and the shape is R = V S V'.
    pub fn from_flat(g: &super::flat::FlatFactor) -> Result<Self> {
        let svd = g.matrix().clone().svd(true, true);
        let z = svd.u.as_ref().expect("svd with u");
        let vt = svd.v_t.as_ref().expect("svd with v_t");
        let r_dim = g.rank();
        let min = svd
            .singular_values
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        let max = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
        if max == 0.0 || min <= super::flat::FLAT_RANK_TOL * max {
            return Err(Error::degenerate(
                "flat factor is rank-deficient, no polar form".to_string(),
            ));
        }
        let u = z * vt;
        let mut sigma = DMatrix::zeros(r_dim, r_dim);
        for k in 0..r_dim {
            sigma[(k, k)] = svd.singular_values[k];
        }
        let r = sym(&(vt.transpose() * sigma * vt))?;
        Ok(Self {
            u: StiefelPoint::new_unchecked(u),
            r: SpdMatrix::new_unchecked(r),
        })
    }

    pub fn subspace(&self) -> &StiefelPoint {
        &self.u
    }

    pub fn shape(&self) -> &SpdMatrix {
        &self.r
    }

    pub fn ambient_dim(&self) -> usize {
        self.u.ambient_dim()
    }

    pub fn rank(&self) -> usize {
        self.u.rank()
    }

    /// Dense W = U R^2 U'.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let ur = self.u.matrix() * self.r.matrix();
        let w = &ur * ur.transpose();
        sym(&w).expect("square product")
    }
}

/// A direction for the polar geometry. `xi_u` is the horizontal subspace
/// component (U' xi_u = 0). `exponent` is the r x r symmetric matrix
/// H = R^-1 xi_r2 R^-1 representing the shape component xi_r2 = R H R; the
/// retraction consumes H directly so R^-1 is never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarTangent {
    pub xi_u: DMatrix<f64>,
    pub exponent: DMatrix<f64>,
}

impl PolarTangent {
    pub fn zeros(d: usize, r: usize) -> Self {
        Self {
            xi_u: DMatrix::zeros(d, r),
            exponent: DMatrix::zeros(r, r),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.xi_u.iter().all(|v| *v == 0.0) && self.exponent.iter().all(|v| *v == 0.0)
    }
}

/// Retraction of the polar geometry with step s along (xi_u, H):
///   U' = qf(U + s xi_u)
///   R^2' = R exp(s H) R      (the affine-invariant geodesic of the shape)
/// The shape factor is stored as the SPD square root of R^2', which equals
/// the factor product R exp((s/2) H) up to an O(r) rotation of the
/// representative, so the update matches the half-exponent factor form while
/// keeping R symmetric positive-definite.
///
/// Exact identity components: s = 0, a zero xi_u, or a zero H leave the
/// corresponding factor untouched bit for bit.
pub fn polar_retract(p: &PolarPoint, t: &PolarTangent, s: f64) -> Result<PolarPoint> {
    let (d, r) = (p.ambient_dim(), p.rank());
    if t.xi_u.shape() != (d, r) || t.exponent.shape() != (r, r) {
        return Err(Error::dimension(
            "polar tangent shape does not match the point".to_string(),
        ));
    }
    if s == 0.0 {
        return Ok(p.clone());
    }
    let u_new = if t.xi_u.iter().all(|v| *v == 0.0) {
        p.u.clone()
    } else {
        qf(&(p.u.matrix() + &t.xi_u * s)).map_err(|e| match e {
            Error::Degenerate(msg) => Error::degenerate(format!("step failure: {msg}")),
            other => other,
        })?
    };
    let r_new = if t.exponent.iter().all(|v| *v == 0.0) {
        p.r.clone()
    } else {
        let e = spd_exp(&(&t.exponent * (0.5 * s)))?;
        let re = p.r.matrix() * e.matrix();
        let r2_new = sym(&(&re * re.transpose()))?;
        spd_sqrt(&r2_new)?
    };
    PolarPoint::new(u_new, r_new)
}
