//! Synthetic trace-regression problems: y = (x' W* x)(1 + noise) with a
//! planted low-rank W*.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{qf, FlatFactor};
use crate::regression::{DataPoint, Model, Prepared, Sample};

/// Problem sizes for the rank-r planted-model generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub r: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the multiplicative noise (1 + nu), nu ~ N(0, noise_std^2).
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            d: 10,
            r: 5,
            n_train: 500,
            n_test: 500,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.d {
            return Err(Error::config(format!(
                "synthetic spec needs 1 <= r <= d, got d = {}, r = {}",
                self.d, self.r
            )));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::config(
                "synthetic spec needs at least one train and one test sample".to_string(),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config(format!(
                "noise standard deviation must be finite and nonnegative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// A generated problem: samples, the planted model, and how many targets
/// came out negative (possible when the noise is large).
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub true_model: Model,
    pub negative_targets: usize,
}

/// Draws W* = G* G*' with standard normal G*, standard normal inputs x, and
/// targets y = (x' W* x)(1 + nu). Everything is a pure function of the spec.
pub fn synth_regression(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = DMatrix::from_fn(spec.d, spec.r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let true_model = Model::Flat(FlatFactor::new(g)?);
    let mut negative_targets = 0usize;
    let train = draw_samples(
        &true_model,
        spec.d,
        spec.n_train,
        spec.noise_std,
        &mut rng,
        &mut negative_targets,
    )?;
    let test = draw_samples(
        &true_model,
        spec.d,
        spec.n_test,
        spec.noise_std,
        &mut rng,
        &mut negative_targets,
    )?;
    Ok(SyntheticData {
        train,
        test,
        true_model,
        negative_targets,
    })
}

/// Planted model with a prescribed spectrum: W* = Q diag(eigenvalues) Q' for
/// a seeded random orthogonal Q, sampled as in `synth_regression`. Useful
/// for targets whose energy is concentrated in a few directions.
pub fn synth_spectrum(
    d: usize,
    eigenvalues: &[f64],
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Model)> {
    if eigenvalues.is_empty() || eigenvalues.len() > d {
        return Err(Error::config(format!(
            "expected between 1 and {d} eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    if eigenvalues.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::degenerate(
            "planted eigenvalues must be strictly positive".to_string(),
        ));
    }
    if n == 0 {
        return Err(Error::config("at least one sample is required".to_string()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::config(format!(
            "noise standard deviation must be finite and nonnegative, got {noise_std}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = qf(&gauss)?;
    let mut g = DMatrix::zeros(d, eigenvalues.len());
    for (col, &v) in eigenvalues.iter().enumerate() {
        let s = v.sqrt();
        for row in 0..d {
            g[(row, col)] = q.matrix()[(row, col)] * s;
        }
    }
    let model = Model::Flat(FlatFactor::new(g)?);
    let mut negatives = 0usize;
    let samples = draw_samples(&model, d, n, noise_std, &mut rng, &mut negatives)?;
    Ok((samples, model))
}

fn draw_samples(
    model: &Model,
    d: usize,
    count: usize,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
    negative_targets: &mut usize,
) -> Result<Vec<Sample>> {
    let prepared = Prepared::new(model)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let point = DataPoint::rank_one(x);
        let clean = prepared.predict(&point)?;
        let nu: f64 = rng.sample::<f64, _>(StandardNormal);
        let y = clean * (1.0 + noise_std * nu);
        if y < 0.0 {
            *negative_targets += 1;
        }
        out.push(Sample::equality(point, y));
    }
    Ok(out)
}
