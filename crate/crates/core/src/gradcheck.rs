//! Finite-difference agreement checks between gradients, metrics, and
//! retractions.
//!
//! For every geometry the directional derivative of the empirical cost along
//! a retraction curve, estimated with central differences, must equal the
//! metric inner product of the curve's direction with the computed gradient.
//! A mismatch in any one of the three ingredients (gradient formula, metric
//! weighting, retraction velocity) shows up as an O(1) relative error, while
//! agreement leaves only the O(h^2) differencing residue.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    affine_inner, cone_affine_exp, frobenius_inner, polar_inner, polar_retract, sym, FlatFactor,
    PolarTangent, SpdMatrix,
};
use crate::regression::{
    cost_and_gradient, empirical_cost, DataPoint, GradientBundle, Model, Sample,
};

/// Problem sizes and differencing step for one check run.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Ambient dimension; the cone geometries run at rank d.
    pub d: usize,
    /// Rank of the flat and polar models.
    pub r: usize,
    /// Random directions probed per geometry (and per lambda for polar).
    pub directions: usize,
    /// Samples in the empirical cost (half rank-one, half dense).
    pub samples: usize,
    /// Central-difference step h.
    pub step: f64,
    pub seed: u64,
    /// Polar metric weights to check.
    pub lambdas: Vec<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            d: 12,
            r: 3,
            directions: 20,
            samples: 24,
            step: 1e-5,
            seed: 7,
            lambdas: vec![0.3, 0.5, 0.7],
        }
    }
}

impl GradCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.d < self.r {
            return Err(Error::config(format!(
                "gradient check needs 1 <= r <= d, got d = {}, r = {}",
                self.d, self.r
            )));
        }
        if self.directions == 0 || self.samples == 0 {
            return Err(Error::config(
                "gradient check needs at least one direction and one sample".to_string(),
            ));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config(format!(
                "differencing step must be positive and finite, got {}",
                self.step
            )));
        }
        for &lambda in &self.lambdas {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::config(format!(
                    "polar checks need lambda strictly inside (0, 1), got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

/// One probed direction: the differenced derivative, the metric pairing, and
/// their relative discrepancy |derivative - pairing| / (1 + |derivative|).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckRecord {
    pub geometry: String,
    pub lambda: Option<f64>,
    pub direction: usize,
    pub derivative: f64,
    pub pairing: f64,
    pub rel_err: f64,
}

/// Largest relative discrepancy in a record set (0 for an empty set).
pub fn max_rel_err(records: &[GradCheckRecord]) -> f64 {
    records.iter().fold(0.0f64, |m, r| m.max(r.rel_err))
}

fn relative_error(derivative: f64, pairing: f64) -> f64 {
    (derivative - pairing).abs() / (1.0 + derivative.abs())
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = gaussian_matrix(rows, cols, rng);
    let n = m.norm();
    if n > 0.0 {
        m / n
    } else {
        m
    }
}

fn unit_sym_gaussian(d: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let m = sym(&gaussian_matrix(d, d, rng))?;
    let n = m.norm();
    Ok(if n > 0.0 { m / n } else { m })
}

/// Equality-relation samples only: bound relations kink the cost at the
/// activation boundary, which breaks central differencing.
fn random_equality_samples(d: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<Sample>> {
    (0..count)
        .map(|k| {
            let point = if k % 2 == 0 {
                DataPoint::rank_one(DVector::from_fn(d, |_, _| {
                    rng.sample::<f64, _>(StandardNormal)
                }))
            } else {
                DataPoint::dense(gaussian_matrix(d, d, rng))?
            };
            Ok(Sample::equality(point, rng.sample::<f64, _>(StandardNormal)))
        })
        .collect()
}

fn central_difference(
    mut value_at: impl FnMut(f64) -> Result<f64>,
    h: f64,
) -> Result<f64> {
    let plus = value_at(h)?;
    let minus = value_at(-h)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Runs the full suite over {flat, polar per lambda, cone affine-invariant,
/// log-Euclidean} and returns one record per probed direction.
pub fn run_gradcheck(config: &GradCheckConfig) -> Result<Vec<GradCheckRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();

    check_flat(config, &mut rng, &mut records)?;
    for &lambda in &config.lambdas {
        check_polar(config, lambda, &mut rng, &mut records)?;
    }
    check_cone(config, &mut rng, &mut records)?;
    check_conelog(config, &mut rng, &mut records)?;
    Ok(records)
}

fn check_flat(
    config: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<GradCheckRecord>,
) -> Result<()> {
    let model = Model::random_flat(config.d, config.r, rng)?;
    let samples = random_equality_samples(config.d, config.samples, rng)?;
    let (_, bundle) = cost_and_gradient(&model, &samples, 0.5)?;
    let grad = match &bundle {
        GradientBundle::Flat { dir } => dir,
        _ => unreachable!("flat model yields a flat bundle"),
    };
    let g = match &model {
        Model::Flat(f) => f.matrix().clone(),
        _ => unreachable!(),
    };
    for k in 0..config.directions {
        let dir = unit_gaussian(config.d, config.r, rng);
        let derivative = central_difference(
            |s| {
                let stepped = Model::Flat(FlatFactor::new(&g + &dir * s)?);
                empirical_cost(&stepped, &samples)
            },
            config.step,
        )?;
        let pairing = frobenius_inner(&dir, grad);
        records.push(GradCheckRecord {
            geometry: "flat".to_string(),
            lambda: None,
            direction: k,
            derivative,
            pairing,
            rel_err: relative_error(derivative, pairing),
        });
    }
    Ok(())
}

fn check_polar(
    config: &GradCheckConfig,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<GradCheckRecord>,
) -> Result<()> {
    let model = Model::random_polar(config.d, config.r, rng)?;
    let point = match &model {
        Model::Polar(p) => p.clone(),
        _ => unreachable!(),
    };
    let samples = random_equality_samples(config.d, config.samples, rng)?;
    let (_, bundle) = cost_and_gradient(&model, &samples, lambda)?;
    let (grad_u, grad_h) = match &bundle {
        GradientBundle::Polar { xi_u, exponent, .. } => (xi_u, exponent),
        _ => unreachable!("polar model yields a polar bundle"),
    };
    let u = point.subspace().matrix().clone();
    for k in 0..config.directions {
        let raw = gaussian_matrix(config.d, config.r, rng);
        let mut zu = &raw - &u * (u.tr_mul(&raw));
        let n = zu.norm();
        if n > 0.0 {
            zu /= n;
        }
        let kh = unit_sym_gaussian(config.r, rng)?;
        let tangent = PolarTangent {
            xi_u: zu.clone(),
            exponent: kh.clone(),
        };
        let derivative = central_difference(
            |s| {
                let stepped = Model::Polar(polar_retract(&point, &tangent, s)?);
                empirical_cost(&stepped, &samples)
            },
            config.step,
        )?;
        let pairing = polar_inner(lambda, (&zu, &kh), (grad_u, grad_h))?;
        records.push(GradCheckRecord {
            geometry: "polar".to_string(),
            lambda: Some(lambda),
            direction: k,
            derivative,
            pairing,
            rel_err: relative_error(derivative, pairing),
        });
    }
    Ok(())
}

fn check_cone(
    config: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<GradCheckRecord>,
) -> Result<()> {
    let d = config.d;
    let a = gaussian_matrix(d, d, rng);
    let w_mat = sym(&(&a * a.transpose() / d as f64))? + DMatrix::identity(d, d) * 0.5;
    let w = SpdMatrix::new(w_mat)?;
    let model = Model::ConeFull(w.clone());
    let samples = random_equality_samples(d, config.samples, rng)?;
    let (_, bundle) = cost_and_gradient(&model, &samples, 0.5)?;
    let grad = match &bundle {
        GradientBundle::Cone { xi } => xi,
        _ => unreachable!("cone model yields a cone bundle"),
    };
    for k in 0..config.directions {
        let dir = unit_sym_gaussian(d, rng)?;
        let derivative = central_difference(
            |s| {
                let stepped = Model::ConeFull(cone_affine_exp(&w, &(&dir * s))?);
                empirical_cost(&stepped, &samples)
            },
            config.step,
        )?;
        let pairing = affine_inner(&w, &dir, grad)?;
        records.push(GradCheckRecord {
            geometry: "cone-affine".to_string(),
            lambda: None,
            direction: k,
            derivative,
            pairing,
            rel_err: relative_error(derivative, pairing),
        });
    }
    Ok(())
}

fn check_conelog(
    config: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
    records: &mut Vec<GradCheckRecord>,
) -> Result<()> {
    let d = config.d;
    let s_mat = sym(&gaussian_matrix(d, d, rng))? * 0.5;
    let model = Model::ConeLog(s_mat.clone());
    let samples = random_equality_samples(d, config.samples, rng)?;
    let (_, bundle) = cost_and_gradient(&model, &samples, 0.5)?;
    let grad = match &bundle {
        GradientBundle::ConeLog { xi } => xi,
        _ => unreachable!("log model yields a log bundle"),
    };
    for k in 0..config.directions {
        let dir = unit_sym_gaussian(d, rng)?;
        let derivative = central_difference(
            |s| {
                let stepped = Model::ConeLog(&s_mat + &dir * s);
                empirical_cost(&stepped, &samples)
            },
            config.step,
        )?;
        let pairing = frobenius_inner(&dir, grad);
        records.push(GradCheckRecord {
            geometry: "cone-logeuclidean".to_string(),
            lambda: None,
            direction: k,
            derivative,
            pairing,
            rel_err: relative_error(derivative, pairing),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_geometries_agree_to_differencing_accuracy() {
        let config = GradCheckConfig {
            d: 6,
            r: 2,
            directions: 6,
            samples: 10,
            ..GradCheckConfig::default()
        };
        let records = run_gradcheck(&config).unwrap();
        assert_eq!(records.len(), 6 * 6); // flat + 3 polar + cone + conelog
        for record in &records {
            assert!(
                record.rel_err <= 1e-6,
                "{} (lambda {:?}) direction {}: derivative {} vs pairing {} (rel err {})",
                record.geometry,
                record.lambda,
                record.direction,
                record.derivative,
                record.pairing,
                record.rel_err
            );
        }
    }

    #[test]
    fn fixed_seed_reproduces_records() {
        let config = GradCheckConfig {
            d: 5,
            r: 2,
            directions: 3,
            samples: 8,
            ..GradCheckConfig::default()
        };
        let a = run_gradcheck(&config).unwrap();
        let b = run_gradcheck(&config).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.rel_err.to_bits(), y.rel_err.to_bits());
        }
    }

    #[test]
    fn rejects_endpoint_lambdas_and_zero_sizes() {
        let mut config = GradCheckConfig::default();
        config.lambdas = vec![0.0];
        assert!(run_gradcheck(&config).is_err());
        config.lambdas = vec![0.5];
        config.directions = 0;
        assert!(run_gradcheck(&config).is_err());
    }
}
