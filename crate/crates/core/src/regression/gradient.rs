//! Riemannian gradients of the empirical cost for every geometry, with
//! structured fast paths that keep rank-one and pair-difference samples at
//! O(dr) per sample.
//!
//! Bundles store the ascent gradient; `retract_descent` moves against it.
//! Mini-batches are accumulated in input order and averaged, so a batch of
//! size one is bitwise identical to the single-sample gradient.

use nalgebra::DMatrix;

use super::data::{residual, DataPoint, Sample};
use super::model::{row_diff, Model, Prepared};
use crate::error::{Error, Result};
use crate::geometry::{
    affine_norm, cone_affine_exp, dexp_sym, flat_norm, logeuclidean_norm, polar_norm,
    polar_retract, sym, FlatFactor, PolarPoint, PolarTangent, SpdMatrix, SymmetricMatrix,
};

/// Gradient of the empirical cost in the representation each geometry
/// actually steps in.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientBundle {
    /// d x r direction for the factor G of W = G G'.
    Flat { dir: DMatrix<f64> },
    /// Horizontal d x r subspace direction and the r x r symmetric exponent
    /// H = R^{-1} grad_{R^2} R^{-1}; the weight lambda blends the two parts.
    Polar {
        xi_u: DMatrix<f64>,
        exponent: DMatrix<f64>,
        lambda: f64,
    },
    /// Symmetric d x d tangent at W for the affine-invariant cone geometry.
    Cone { xi: DMatrix<f64> },
    /// Symmetric d x d gradient in S = log W coordinates (the ambient
    /// gradient pushed through the Frechet derivative of exp at S).
    ConeLog { xi: DMatrix<f64> },
}

impl GradientBundle {
    /// Zero bundle shaped like the given model. `lambda` is the polar metric
    /// weight; other geometries ignore it.
    pub fn zeros_like(model: &Model, lambda: f64) -> Result<GradientBundle> {
        let d = model.dim();
        let r = model.rank();
        Ok(match model {
            Model::Flat(_) => GradientBundle::Flat {
                dir: DMatrix::zeros(d, r),
            },
            Model::Polar(_) => {
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(Error::config(format!(
                        "polar metric weight must lie in [0, 1], got {lambda}"
                    )));
                }
                GradientBundle::Polar {
                    xi_u: DMatrix::zeros(d, r),
                    exponent: DMatrix::zeros(r, r),
                    lambda,
                }
            }
            Model::ConeFull(_) => GradientBundle::Cone {
                xi: DMatrix::zeros(d, d),
            },
            Model::ConeLog(_) => GradientBundle::ConeLog {
                xi: DMatrix::zeros(d, d),
            },
        })
    }

    /// True when every stored entry is exactly zero (e.g. all constraints
    /// satisfied), so a descent step is a no-op.
    pub fn is_zero(&self) -> bool {
        match self {
            GradientBundle::Flat { dir } => dir.iter().all(|v| *v == 0.0),
            GradientBundle::Polar { xi_u, exponent, .. } => {
                xi_u.iter().all(|v| *v == 0.0) && exponent.iter().all(|v| *v == 0.0)
            }
            GradientBundle::Cone { xi } | GradientBundle::ConeLog { xi } => {
                xi.iter().all(|v| *v == 0.0)
            }
        }
    }

    /// Divides every entry by `count` (mini-batch mean).
    fn unscale(&mut self, count: f64) {
        match self {
            GradientBundle::Flat { dir } => dir.unscale_mut(count),
            GradientBundle::Polar { xi_u, exponent, .. } => {
                xi_u.unscale_mut(count);
                exponent.unscale_mut(count);
            }
            GradientBundle::Cone { xi } | GradientBundle::ConeLog { xi } => xi.unscale_mut(count),
        }
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        match self {
            GradientBundle::Flat { dir } => dir.scale_mut(factor),
            GradientBundle::Polar { xi_u, exponent, .. } => {
                xi_u.scale_mut(factor);
                exponent.scale_mut(factor);
            }
            GradientBundle::Cone { xi } | GradientBundle::ConeLog { xi } => xi.scale_mut(factor),
        }
    }

    /// Norm of the bundle in the metric of the model's geometry. The flat and
    /// log geometries use the Frobenius norm, the cone uses the
    /// affine-invariant norm at W, and the polar geometry blends the subspace
    /// and shape parts with weights 1/lambda and 1/(1-lambda).
    pub fn metric_norm(&self, model: &Model) -> Result<f64> {
        match (self, model) {
            (GradientBundle::Flat { dir }, Model::Flat(_)) => Ok(flat_norm(dir)),
            (
                GradientBundle::Polar {
                    xi_u,
                    exponent,
                    lambda,
                },
                Model::Polar(_),
            ) => polar_norm(*lambda, xi_u, exponent),
            (GradientBundle::Cone { xi }, Model::ConeFull(w)) => affine_norm(w, xi),
            (GradientBundle::ConeLog { xi }, Model::ConeLog(_)) => Ok(logeuclidean_norm(xi)),
            _ => Err(Error::dimension(
                "gradient bundle does not match the model geometry".to_string(),
            )),
        }
    }

    fn accumulate(&mut self, prepared: &Prepared, e: f64, point: &DataPoint) -> Result<()> {
        if e == 0.0 {
            return Ok(());
        }
        match self {
            GradientBundle::Flat { dir } => {
                let g = prepared.flat_g().ok_or_else(mismatch)?;
                flat_contribution(dir, g, e, point);
            }
            GradientBundle::Polar {
                xi_u,
                exponent,
                lambda,
            } => {
                let u = prepared.polar_u().ok_or_else(mismatch)?;
                let r = prepared.polar_r().ok_or_else(mismatch)?;
                let r2 = prepared.polar_r2().ok_or_else(mismatch)?;
                polar_contribution(xi_u, exponent, u, r, r2, *lambda, e, point)?;
            }
            GradientBundle::Cone { xi } => {
                let w = prepared.dense_w().ok_or_else(mismatch)?;
                cone_contribution(xi, w, e, point)?;
            }
            GradientBundle::ConeLog { xi } => log_contribution(xi, e, point),
        }
        Ok(())
    }
}

fn mismatch() -> Error {
    Error::dimension("gradient bundle does not match the prepared model".to_string())
}

/// acc += alpha * m, elementwise (matrix counterpart of the vector axpy).
fn add_scaled(acc: &mut DMatrix<f64>, alpha: f64, m: &DMatrix<f64>) {
    acc.zip_apply(m, |a, b| *a += alpha * b);
}

/// dG += 2e Sym(X) G, with rank-one and pair-difference shortcuts.
fn flat_contribution(acc: &mut DMatrix<f64>, g: &DMatrix<f64>, e: f64, point: &DataPoint) {
    let c = 2.0 * e;
    match point {
        DataPoint::Dense(x) => acc.gemm(c, x, g, 1.0),
        DataPoint::RankOne(x) => {
            let z = g.tr_mul(x);
            acc.ger(c, x, &z, 1.0);
        }
        DataPoint::PairDiff { i, j, .. } => {
            let z = row_diff(g, *i, *j);
            for k in 0..g.ncols() {
                let v = c * z[k];
                acc[(*i, k)] += v;
                acc[(*j, k)] -= v;
            }
        }
    }
}

/// xi_u += 2 lambda e (I - U U') Sym(X) U R^2 and
/// H += (1 - lambda) e R (U' Sym(X) U) R, skipping whichever part the
/// endpoint weights freeze.
#[allow(clippy::too_many_arguments)]
fn polar_contribution(
    xi_acc: &mut DMatrix<f64>,
    h_acc: &mut DMatrix<f64>,
    u: &DMatrix<f64>,
    r: &DMatrix<f64>,
    r2: &DMatrix<f64>,
    lambda: f64,
    e: f64,
    point: &DataPoint,
) -> Result<()> {
    let cu = 2.0 * lambda * e;
    let ch = (1.0 - lambda) * e;
    match point {
        DataPoint::Dense(x) => {
            let m = x * u;
            let utm = u.tr_mul(&m);
            if lambda != 0.0 {
                let horizontal = &m - u * &utm;
                xi_acc.gemm(cu, &horizontal, r2, 1.0);
            }
            if lambda != 1.0 {
                let h = sym(&(r * &utm * r))?;
                add_scaled(h_acc, ch, &h);
            }
        }
        DataPoint::RankOne(x) => {
            let z = u.tr_mul(x);
            if lambda != 0.0 {
                let residual_part = x - u * &z;
                let q = r2 * &z;
                xi_acc.ger(cu, &residual_part, &q, 1.0);
            }
            if lambda != 1.0 {
                let v = r * &z;
                h_acc.ger(ch, &v, &v, 1.0);
            }
        }
        DataPoint::PairDiff { i, j, .. } => {
            let z = row_diff(u, *i, *j);
            if lambda != 0.0 {
                let mut residual_part = -(u * &z);
                residual_part[*i] += 1.0;
                residual_part[*j] -= 1.0;
                let q = r2 * &z;
                xi_acc.ger(cu, &residual_part, &q, 1.0);
            }
            if lambda != 1.0 {
                let v = r * &z;
                h_acc.ger(ch, &v, &v, 1.0);
            }
        }
    }
    Ok(())
}

/// xi += e W Sym(X) W; for structured points W Sym(X) W collapses to an
/// outer product of W x.
fn cone_contribution(
    acc: &mut DMatrix<f64>,
    w: &DMatrix<f64>,
    e: f64,
    point: &DataPoint,
) -> Result<()> {
    match point {
        DataPoint::Dense(x) => {
            let t = sym(&(w * x * w))?;
            add_scaled(acc, e, &t);
        }
        DataPoint::RankOne(x) => {
            let v = w * x;
            acc.ger(e, &v, &v, 1.0);
        }
        DataPoint::PairDiff { i, j, .. } => {
            let v = w.column(*i) - w.column(*j);
            acc.ger(e, &v, &v, 1.0);
        }
    }
    Ok(())
}

/// xi += e Sym(X), the direction applied to S = log W.
fn log_contribution(acc: &mut DMatrix<f64>, e: f64, point: &DataPoint) {
    match point {
        DataPoint::Dense(x) => add_scaled(acc, e, x),
        DataPoint::RankOne(x) => acc.ger(e, x, x, 1.0),
        DataPoint::PairDiff { i, j, .. } => {
            acc[(*i, *i)] += e;
            acc[(*j, *j)] += e;
            acc[(*i, *j)] -= e;
            acc[(*j, *i)] -= e;
        }
    }
}

fn accumulate_batch<'s>(
    prepared: &Prepared,
    bundle: &mut GradientBundle,
    samples: impl IntoIterator<Item = &'s Sample>,
) -> Result<(f64, usize)> {
    let mut cost = 0.0;
    let mut count = 0usize;
    for sample in samples {
        let y_hat = prepared.predict(&sample.point)?;
        let e = residual(y_hat, sample);
        cost += 0.5 * e * e;
        bundle.accumulate(prepared, e, &sample.point)?;
        count += 1;
    }
    Ok((cost, count))
}

/// Converts an accumulated mean bundle into the geometry's gradient
/// representation. Only the log-Euclidean geometry needs work: the ambient
/// mean e Sym(X) is pushed through the exponential's Frechet derivative so
/// the bundle is the exact Riemannian gradient in S = log W coordinates.
/// Linear in the bundle, so averaging before or after commutes.
fn finalize_bundle(prepared: &Prepared, bundle: &mut GradientBundle) -> Result<()> {
    if let GradientBundle::ConeLog { xi } = bundle {
        if !xi.iter().all(|v| *v == 0.0) {
            let (vals, vecs) = prepared
                .log_eigen()
                .ok_or_else(|| Error::dimension("log bundle with non-log model".to_string()))?;
            *xi = dexp_sym(vals, vecs, xi)?;
        }
    }
    Ok(())
}

/// Mean gradient bundle over a mini-batch, accumulated in input order.
/// `lambda` is the polar metric weight (ignored by other geometries).
pub fn minibatch_gradient(model: &Model, samples: &[Sample], lambda: f64) -> Result<GradientBundle> {
    Ok(minibatch_cost_gradient(model, samples, lambda)?.1)
}

/// Mean instantaneous cost and mean gradient of a mini-batch, visited in
/// input order.
pub(crate) fn minibatch_cost_gradient<'s>(
    model: &Model,
    samples: impl IntoIterator<Item = &'s Sample>,
    lambda: f64,
) -> Result<(f64, GradientBundle)> {
    let prepared = Prepared::new(model)?;
    let mut bundle = GradientBundle::zeros_like(model, lambda)?;
    let (cost, count) = accumulate_batch(&prepared, &mut bundle, samples)?;
    if count == 0 {
        return Err(Error::config("empty mini-batch".to_string()));
    }
    bundle.unscale(count as f64);
    finalize_bundle(&prepared, &mut bundle)?;
    Ok((cost / count as f64, bundle))
}

/// Gradient of a single sample; bitwise identical to a size-one mini-batch.
pub fn sample_gradient(model: &Model, sample: &Sample, lambda: f64) -> Result<GradientBundle> {
    minibatch_gradient(model, std::slice::from_ref(sample), lambda)
}

/// Empirical cost and its gradient from one pass over the samples, sharing
/// the prepared predictor between the two.
pub fn cost_and_gradient(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
) -> Result<(f64, GradientBundle)> {
    let prepared = Prepared::new(model)?;
    let mut bundle = GradientBundle::zeros_like(model, lambda)?;
    let (cost, count) = accumulate_batch(&prepared, &mut bundle, samples)?;
    if count == 0 {
        return Err(Error::config("empty sample set".to_string()));
    }
    bundle.unscale(count as f64);
    finalize_bundle(&prepared, &mut bundle)?;
    Ok((cost / count as f64, bundle))
}

/// Single-sample gradient for the flat geometry: 2e Sym(X) G.
pub fn grad_flat(g: &FlatFactor, sample: &Sample) -> Result<GradientBundle> {
    let prepared = Prepared::from_flat_matrix(g.matrix());
    let mut dir = DMatrix::zeros(g.ambient_dim(), g.rank());
    let e = residual(prepared.predict(&sample.point)?, sample);
    if e != 0.0 {
        flat_contribution(&mut dir, g.matrix(), e, &sample.point);
    }
    Ok(GradientBundle::Flat { dir })
}

/// Single-sample gradient for the polar geometry under the lambda-weighted
/// metric.
pub fn grad_polar(p: &PolarPoint, sample: &Sample, lambda: f64) -> Result<GradientBundle> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!(
            "polar metric weight must lie in [0, 1], got {lambda}"
        )));
    }
    let prepared = Prepared::from_polar_point(p);
    let (d, r) = (p.ambient_dim(), p.rank());
    let mut xi_u = DMatrix::zeros(d, r);
    let mut exponent = DMatrix::zeros(r, r);
    let e = residual(prepared.predict(&sample.point)?, sample);
    if e != 0.0 {
        polar_contribution(
            &mut xi_u,
            &mut exponent,
            p.subspace().matrix(),
            p.shape().matrix(),
            prepared.polar_r2().expect("prepared from polar point"),
            lambda,
            e,
            &sample.point,
        )?;
    }
    Ok(GradientBundle::Polar {
        xi_u,
        exponent,
        lambda,
    })
}

/// Single-sample gradient for the affine-invariant cone geometry:
/// e W Sym(X) W.
pub fn grad_cone_affine(w: &SpdMatrix, sample: &Sample) -> Result<GradientBundle> {
    let prepared = Prepared::from_cone_matrix(w.matrix());
    let mut xi = DMatrix::zeros(w.dim(), w.dim());
    let e = residual(prepared.predict(&sample.point)?, sample);
    if e != 0.0 {
        cone_contribution(&mut xi, w.matrix(), e, &sample.point)?;
    }
    Ok(GradientBundle::Cone { xi })
}

/// Single-sample gradient for the log-Euclidean geometry: the ambient
/// gradient e Sym(X) pushed through the Frechet derivative of exp at
/// S = log W, giving the exact gradient in the flat S coordinates.
pub fn grad_logeuclidean(s: &SymmetricMatrix, sample: &Sample) -> Result<GradientBundle> {
    let prepared = Prepared::from_log_matrix(s)?;
    let mut xi = DMatrix::zeros(s.nrows(), s.nrows());
    let e = residual(prepared.predict(&sample.point)?, sample);
    if e != 0.0 {
        log_contribution(&mut xi, e, &sample.point);
    }
    let mut bundle = GradientBundle::ConeLog { xi };
    finalize_bundle(&prepared, &mut bundle)?;
    Ok(bundle)
}

/// One descent step of length `s` against the bundle, through the geometry's
/// retraction. A zero bundle returns the model unchanged. Flat steps are
/// validated to keep rank r; validation failures surface as errors so a line
/// search can shrink the step.
pub fn retract_descent(model: &Model, bundle: &GradientBundle, s: f64) -> Result<Model> {
    if bundle.is_zero() {
        return Ok(model.clone());
    }
    match (model, bundle) {
        (Model::Flat(g), GradientBundle::Flat { dir }) => {
            let stepped = g.matrix() - dir * s;
            Ok(Model::Flat(FlatFactor::new(stepped)?))
        }
        (Model::Polar(p), GradientBundle::Polar { xi_u, exponent, .. }) => {
            let tangent = PolarTangent {
                xi_u: xi_u.clone(),
                exponent: exponent.clone(),
            };
            Ok(Model::Polar(polar_retract(p, &tangent, -s)?))
        }
        (Model::ConeFull(w), GradientBundle::Cone { xi }) => {
            let scaled = xi * (-s);
            Ok(Model::ConeFull(cone_affine_exp(w, &scaled)?))
        }
        (Model::ConeLog(mat), GradientBundle::ConeLog { xi }) => {
            Ok(Model::ConeLog(mat - xi * s))
        }
        _ => Err(Error::dimension(
            "gradient bundle does not match the model geometry".to_string(),
        )),
    }
}
