//! The model W and its prediction map yhat = tr(W X). Each geometry keeps W
//! in factored form; predictions exploit the factors so that rank-one and
//! pair-difference observations cost O(dr) and O(r^2) instead of O(d^2).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::data::{loss, DataPoint, Sample};
use crate::error::{Error, Result};
use crate::geometry::{
    qf, spd_exp, spd_exp_parts, FlatFactor, PolarPoint, SpdMatrix, StiefelPoint,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// W = G G', rank r, flat quotient geometry.
    Flat(FlatFactor),
    /// W = U R^2 U', rank r, polar quotient geometry.
    Polar(PolarPoint),
    /// Full-rank W in the cone with the affine-invariant geometry.
    ConeFull(SpdMatrix),
    /// Full-rank W = exp(S), stored as the symmetric S (log-Euclidean).
    ConeLog(DMatrix<f64>),
}

impl Model {
    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        match self {
            Model::Flat(g) => g.ambient_dim(),
            Model::Polar(p) => p.ambient_dim(),
            Model::ConeFull(w) => w.dim(),
            Model::ConeLog(s) => s.nrows(),
        }
    }

    /// Rank of W (d for the cone geometries).
    pub fn rank(&self) -> usize {
        match self {
            Model::Flat(g) => g.rank(),
            Model::Polar(p) => p.rank(),
            Model::ConeFull(w) => w.dim(),
            Model::ConeLog(s) => s.nrows(),
        }
    }

    pub fn geometry_name(&self) -> &'static str {
        match self {
            Model::Flat(_) => "flat",
            Model::Polar(_) => "polar",
            Model::ConeFull(_) => "cone-affine",
            Model::ConeLog(_) => "cone-logeuclidean",
        }
    }

    /// Dense W. For the log geometry this exponentiates S.
    pub fn reconstruct(&self) -> Result<DMatrix<f64>> {
        match self {
            Model::Flat(g) => Ok(g.reconstruct()),
            Model::Polar(p) => Ok(p.reconstruct()),
            Model::ConeFull(w) => Ok(w.matrix().clone()),
            Model::ConeLog(s) => Ok(spd_exp(s)?.into_matrix()),
        }
    }

    /// Relative Frobenius change between two iterates of the same geometry.
    /// For polar models the U and R entries are stacked.
    pub fn rel_change(&self, next: &Model) -> Result<f64> {
        let (diff_sq, base_sq) = match (self, next) {
            (Model::Flat(a), Model::Flat(b)) => (
                (a.matrix() - b.matrix()).norm_squared(),
                a.matrix().norm_squared(),
            ),
            (Model::Polar(a), Model::Polar(b)) => {
                let du = (a.subspace().matrix() - b.subspace().matrix()).norm_squared();
                let dr = (a.shape().matrix() - b.shape().matrix()).norm_squared();
                let bu = a.subspace().matrix().norm_squared();
                let br = a.shape().matrix().norm_squared();
                (du + dr, bu + br)
            }
            (Model::ConeFull(a), Model::ConeFull(b)) => (
                (a.matrix() - b.matrix()).norm_squared(),
                a.matrix().norm_squared(),
            ),
            (Model::ConeLog(a), Model::ConeLog(b)) => {
                ((a - b).norm_squared(), a.norm_squared())
            }
            _ => {
                return Err(Error::dimension(
                    "cannot compare models of different geometries".to_string(),
                ))
            }
        };
        if base_sq == 0.0 {
            return Ok(diff_sq.sqrt());
        }
        Ok((diff_sq / base_sq).sqrt())
    }

    /// Random flat model with standard normal factor entries.
    pub fn random_flat(d: usize, r: usize, rng: &mut impl Rng) -> Result<Model> {
        let g = DMatrix::from_fn(d, r, |_, _| rng.sample(StandardNormal));
        Ok(Model::Flat(FlatFactor::new(g)?))
    }

    /// Random polar model: U = qf of a Gaussian matrix, R = I.
    pub fn random_polar(d: usize, r: usize, rng: &mut impl Rng) -> Result<Model> {
        let a = DMatrix::from_fn(d, r, |_, _| rng.sample(StandardNormal));
        let u = qf(&a)?;
        Ok(Model::Polar(PolarPoint::new(u, SpdMatrix::identity(r))?))
    }

    /// Identity initialization: W = I for the cone geometries, S = 0 for the
    /// log geometry, and the first r identity columns for the factored ones.
    pub fn identity(geometry: &str, d: usize, r: usize) -> Result<Model> {
        if r == 0 || r > d {
            return Err(Error::config(format!(
                "identity init needs 1 <= r <= d, got d={d}, r={r}"
            )));
        }
        let full_rank = |name: &str| {
            if r == d {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "the {name} geometry is full-rank and needs r = d, got d={d}, r={r}"
                )))
            }
        };
        match geometry {
            "flat" => Ok(Model::Flat(FlatFactor::new(DMatrix::identity(d, r))?)),
            "polar" => {
                let u = StiefelPoint::new(DMatrix::identity(d, r))?;
                Ok(Model::Polar(PolarPoint::new(u, SpdMatrix::identity(r))?))
            }
            "cone-affine" => {
                full_rank("cone-affine")?;
                Ok(Model::ConeFull(SpdMatrix::identity(d)))
            }
            "cone-logeuclidean" => {
                full_rank("cone-logeuclidean")?;
                Ok(Model::ConeLog(DMatrix::zeros(d, d)))
            }
            other => Err(Error::config(format!("unknown geometry '{other}'"))),
        }
    }

    /// Flat/polar model from a subspace scaled by the square roots of the
    /// given spectrum (typically PCA eigenvalues).
    pub fn from_scaled_subspace(
        geometry: &str,
        u0: &StiefelPoint,
        eigenvalues: &[f64],
    ) -> Result<Model> {
        if eigenvalues.len() != u0.rank() {
            return Err(Error::dimension(
                "one eigenvalue per subspace direction is required".to_string(),
            ));
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::degenerate(
                "subspace scaling needs strictly positive eigenvalues".to_string(),
            ));
        }
        match geometry {
            "flat" => {
                let mut g = u0.matrix().clone();
                for (col, &v) in eigenvalues.iter().enumerate() {
                    let s = v.sqrt();
                    for row in 0..g.nrows() {
                        g[(row, col)] *= s;
                    }
                }
                Ok(Model::Flat(FlatFactor::new(g)?))
            }
            "polar" => {
                let roots: Vec<f64> = eigenvalues.iter().map(|v| v.sqrt()).collect();
                Ok(Model::Polar(PolarPoint::new(
                    u0.clone(),
                    SpdMatrix::from_diagonal(&roots)?,
                )?))
            }
            other => Err(Error::config(format!(
                "scaled-subspace init applies to flat or polar, not '{other}'"
            ))),
        }
    }
}

/// Prediction context: factors borrowed from the model plus the few products
/// worth computing once per model (R^2 for polar, exp(S) for log models).
pub struct Prepared<'a> {
    inner: PreparedInner<'a>,
    dim: usize,
}

enum PreparedInner<'a> {
    Flat {
        g: &'a DMatrix<f64>,
    },
    Polar {
        u: &'a DMatrix<f64>,
        r: &'a DMatrix<f64>,
        r2: DMatrix<f64>,
    },
    Cone {
        w: &'a DMatrix<f64>,
    },
    ConeLog {
        w: DMatrix<f64>,
        vals: Vec<f64>,
        vecs: DMatrix<f64>,
    },
}

impl<'a> Prepared<'a> {
    pub fn new(model: &'a Model) -> Result<Self> {
        let dim = model.dim();
        let inner = match model {
            Model::Flat(g) => PreparedInner::Flat { g: g.matrix() },
            Model::Polar(p) => PreparedInner::Polar {
                u: p.subspace().matrix(),
                r: p.shape().matrix(),
                r2: p.shape().squared(),
            },
            Model::ConeFull(w) => PreparedInner::Cone { w: w.matrix() },
            Model::ConeLog(s) => {
                let (w, vals, vecs) = spd_exp_parts(s)?;
                PreparedInner::ConeLog { w, vals, vecs }
            }
        };
        Ok(Prepared { inner, dim })
    }

    pub(crate) fn from_flat_matrix(g: &'a DMatrix<f64>) -> Self {
        Prepared {
            dim: g.nrows(),
            inner: PreparedInner::Flat { g },
        }
    }

    pub(crate) fn from_polar_point(p: &'a PolarPoint) -> Self {
        Prepared {
            dim: p.ambient_dim(),
            inner: PreparedInner::Polar {
                u: p.subspace().matrix(),
                r: p.shape().matrix(),
                r2: p.shape().squared(),
            },
        }
    }

    pub(crate) fn from_cone_matrix(w: &'a DMatrix<f64>) -> Self {
        Prepared {
            dim: w.nrows(),
            inner: PreparedInner::Cone { w },
        }
    }

    pub(crate) fn from_log_matrix(s: &DMatrix<f64>) -> Result<Prepared<'static>> {
        let (w, vals, vecs) = spd_exp_parts(s)?;
        Ok(Prepared {
            dim: s.nrows(),
            inner: PreparedInner::ConeLog { w, vals, vecs },
        })
    }

    pub(crate) fn flat_g(&self) -> Option<&DMatrix<f64>> {
        match &self.inner {
            PreparedInner::Flat { g } => Some(g),
            _ => None,
        }
    }

    pub(crate) fn polar_u(&self) -> Option<&DMatrix<f64>> {
        match &self.inner {
            PreparedInner::Polar { u, .. } => Some(u),
            _ => None,
        }
    }

    pub(crate) fn polar_r2(&self) -> Option<&DMatrix<f64>> {
        match &self.inner {
            PreparedInner::Polar { r2, .. } => Some(r2),
            _ => None,
        }
    }

    pub(crate) fn polar_r(&self) -> Option<&DMatrix<f64>> {
        match &self.inner {
            PreparedInner::Polar { r, .. } => Some(r),
            _ => None,
        }
    }

    pub(crate) fn dense_w(&self) -> Option<&DMatrix<f64>> {
        match &self.inner {
            PreparedInner::Cone { w } => Some(w),
            PreparedInner::ConeLog { w, .. } => Some(w),
            _ => None,
        }
    }

    /// Eigendecomposition of S = log W for the log-Euclidean geometry, used
    /// to push the ambient cost gradient through the exponential.
    pub(crate) fn log_eigen(&self) -> Option<(&[f64], &DMatrix<f64>)> {
        match &self.inner {
            PreparedInner::ConeLog { vals, vecs, .. } => Some((vals, vecs)),
            _ => None,
        }
    }

    pub fn predict(&self, point: &DataPoint) -> Result<f64> {
        if point.dim() != self.dim {
            return Err(Error::dimension(format!(
                "observation has dimension {}, model has {}",
                point.dim(),
                self.dim
            )));
        }
        Ok(match &self.inner {
            PreparedInner::Flat { g } => match point {
                // tr(G G' X) = tr(G' X G) = <G, X G>.
                DataPoint::Dense(x) => {
                    let xg = x * *g;
                    g.dot(&xg)
                }
                DataPoint::RankOne(x) => {
                    let z = g.transpose() * x;
                    z.norm_squared()
                }
                DataPoint::PairDiff { i, j, .. } => {
                    let z = row_diff(g, *i, *j);
                    z.norm_squared()
                }
            },
            PreparedInner::Polar { u, r, r2 } => match point {
                DataPoint::Dense(x) => {
                    // tr(U R^2 U' X) = <R^2, U' X U>.
                    let xu = x * *u;
                    let m = u.transpose() * xu;
                    r2.dot(&m)
                }
                DataPoint::RankOne(x) => {
                    let z = u.transpose() * x;
                    (*r * z).norm_squared()
                }
                DataPoint::PairDiff { i, j, .. } => {
                    let z = row_diff(u, *i, *j);
                    (*r * z).norm_squared()
                }
            },
            PreparedInner::Cone { w } => cone_predict(w, point),
            PreparedInner::ConeLog { w, .. } => cone_predict(w, point),
        })
    }
}

fn cone_predict(w: &DMatrix<f64>, point: &DataPoint) -> f64 {
    match point {
        DataPoint::Dense(x) => w.dot(x),
        DataPoint::RankOne(x) => {
            let wx = w * x;
            x.dot(&wx)
        }
        // Kernel trace identity, evaluated with exactly these operations:
        // tr(W (e_i - e_j)(e_i - e_j)') = W_ii + W_jj - 2 W_ij.
        DataPoint::PairDiff { i, j, .. } => w[(*i, *i)] + w[(*j, *j)] - 2.0 * w[(*i, *j)],
    }
}

/// Row i minus row j of a d x r matrix, as a length-r vector.
pub(crate) fn row_diff(m: &DMatrix<f64>, i: usize, j: usize) -> DVector<f64> {
    let r = m.ncols();
    let mut z = DVector::zeros(r);
    for k in 0..r {
        z[k] = m[(i, k)] - m[(j, k)];
    }
    z
}

/// yhat = tr(W X).
pub fn predict(model: &Model, point: &DataPoint) -> Result<f64> {
    Prepared::new(model)?.predict(point)
}

/// Empirical cost f_n(W) = (1/2n) sum of squared residuals (hinged for
/// inequality relations).
pub fn empirical_cost(model: &Model, samples: &[Sample]) -> Result<f64> {
    empirical_cost_over(model, samples)
}

/// Empirical cost over any sample sequence (mean of per-sample losses).
pub(crate) fn empirical_cost_over<'s>(
    model: &Model,
    samples: impl IntoIterator<Item = &'s Sample>,
) -> Result<f64> {
    let prepared = Prepared::new(model)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for sample in samples {
        let y_hat = prepared.predict(&sample.point)?;
        acc += loss(y_hat, sample);
        count += 1;
    }
    if count == 0 {
        return Err(Error::config("empty sample set".to_string()));
    }
    Ok(acc / count as f64)
}
