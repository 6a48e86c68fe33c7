//! Batch Riemannian gradient descent with Armijo backtracking line search
//! and a three-way stopping rule (absolute cost, relative cost change,
//! relative parameter change).

use std::time::Instant;

use crate::error::{Error, Result};
use crate::optim::report::{FitReport, IterationRecord, Termination};
use crate::regression::{
    cost_and_gradient, empirical_cost, retract_descent, GradientBundle, Model, Sample,
};

#[derive(Debug, Clone)]
pub struct BatchConfig {
    /// Scale of the largest trial step: s_max = s0 / ||grad||.
    pub s0: f64,
    /// Sufficient-decrease constant of the Armijo predicate.
    pub c: f64,
    /// Tolerance shared by all three stopping tests.
    pub eps_tol: f64,
    /// Cap on accepted gradient steps.
    pub max_iters: usize,
    /// Cap on step halvings within one line search.
    pub max_halvings: u32,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            s0: 100.0,
            c: 0.5,
            eps_tol: 1e-5,
            max_iters: 1000,
            max_halvings: 50,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::config(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::config(format!(
                "sufficient-decrease constant must lie in (0, 1), got {}",
                self.c
            )));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::config(format!(
                "stopping tolerance must be positive, got {}",
                self.eps_tol
            )));
        }
        Ok(())
    }
}

/// Outcome of one accepted Armijo line search.
#[derive(Debug)]
pub struct ArmijoStep {
    pub model: Model,
    pub cost: f64,
    pub step: f64,
    pub halvings: u32,
}

/// Backtracking line search: start at s_max = s0 / ||grad|| and halve until
/// f(R(-s grad)) <= f(W) - c s ||grad||^2 holds in the geometry's metric.
/// Retraction failures and non-finite trial costs count as failed trials.
pub fn armijo_search(
    model: &Model,
    bundle: &GradientBundle,
    grad_norm: f64,
    cost_now: f64,
    samples: &[Sample],
    config: &BatchConfig,
) -> Result<ArmijoStep> {
    if !(grad_norm > 0.0 && grad_norm.is_finite()) {
        return Err(Error::numerical(format!(
            "line search needs a positive finite gradient norm, got {grad_norm}"
        )));
    }
    let s_max = config.s0 / grad_norm;
    let decrease_rate = config.c * grad_norm * grad_norm;
    let mut s = s_max;
    for halvings in 0..=config.max_halvings {
        if let Ok(candidate) = retract_descent(model, bundle, s) {
            if let Ok(trial_cost) = empirical_cost(&candidate, samples) {
                if trial_cost.is_finite() && trial_cost <= cost_now - s * decrease_rate {
                    return Ok(ArmijoStep {
                        model: candidate,
                        cost: trial_cost,
                        step: s,
                        halvings,
                    });
                }
            }
        }
        s *= 0.5;
    }
    Err(Error::LinesearchExhausted {
        halvings: config.max_halvings,
    })
}

/// Stopping decision for the transition from `prev` to `current`, tested in
/// order: absolute cost, relative cost change, relative parameter change.
pub fn stopping_check(
    current_cost: f64,
    prev_cost: f64,
    prev_model: &Model,
    current_model: &Model,
    eps_tol: f64,
) -> Result<Option<Termination>> {
    if current_cost <= eps_tol {
        return Ok(Some(Termination::CostTol));
    }
    if prev_cost > 0.0 && (current_cost - prev_cost).abs() / prev_cost <= eps_tol {
        return Ok(Some(Termination::RelCostTol));
    }
    if prev_model.rel_change(current_model)? <= eps_tol {
        return Ok(Some(Termination::RelParamTol));
    }
    Ok(None)
}

/// Batch descent. `lambda` is the polar metric weight (ignored by other
/// geometries). A failed line search ends the run with the
/// `linesearch-failure` termination rather than an error; the report is
/// complete up to that point.
pub fn batch_fit(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
    config: &BatchConfig,
) -> Result<(Model, FitReport)> {
    batch_fit_with_observer(model, samples, lambda, config, |_, _| Ok(()))
}

/// `batch_fit` that also hands every iterate (including the initial one, at
/// index 0) to `observer` before stepping on.
pub fn batch_fit_with_observer(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
    config: &BatchConfig,
    mut observer: impl FnMut(usize, &Model) -> Result<()>,
) -> Result<(Model, FitReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::config("batch fit needs at least one sample".to_string()));
    }
    let started = Instant::now();
    let mut current = model.clone();
    let mut prev: Option<(f64, Model)> = None;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut initial_cost = f64::NAN;
    observer(0, &current)?;

    let (termination, final_cost) = loop {
        let (cost, bundle) = cost_and_gradient(&current, samples, lambda)?;
        if !cost.is_finite() {
            return Err(Error::numerical(format!(
                "empirical cost became non-finite ({cost}) at iteration {}",
                iterations.len()
            )));
        }
        if prev.is_none() {
            initial_cost = cost;
        }
        match &prev {
            None => {
                if cost <= config.eps_tol {
                    break (Termination::CostTol, cost);
                }
            }
            Some((prev_cost, prev_model)) => {
                if let Some(reason) =
                    stopping_check(cost, *prev_cost, prev_model, &current, config.eps_tol)?
                {
                    break (reason, cost);
                }
            }
        }
        if bundle.is_zero() {
            break (Termination::RelParamTol, cost);
        }
        if iterations.len() >= config.max_iters {
            break (Termination::MaxIters, cost);
        }
        let grad_norm = bundle.metric_norm(&current)?;
        match armijo_search(&current, &bundle, grad_norm, cost, samples, config) {
            Ok(accepted) => {
                iterations.push(IterationRecord {
                    cost,
                    step: accepted.step,
                    grad_norm,
                    halvings: accepted.halvings,
                    elapsed_seconds: started.elapsed().as_secs_f64(),
                });
                observer(iterations.len(), &accepted.model)?;
                prev = Some((cost, std::mem::replace(&mut current, accepted.model)));
            }
            Err(Error::LinesearchExhausted { halvings }) => {
                iterations.push(IterationRecord {
                    cost,
                    step: 0.0,
                    grad_norm,
                    halvings,
                    elapsed_seconds: started.elapsed().as_secs_f64(),
                });
                break (Termination::LinesearchFailure, cost);
            }
            Err(other) => return Err(other),
        }
    };

    let report = FitReport {
        termination,
        initial_cost,
        final_cost,
        iterations,
    };
    Ok((current, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SpdMatrix, StiefelPoint};
    use crate::regression::{predict, DataPoint, Relation};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy_problem(
        d: usize,
        r: usize,
        n: usize,
        noise: f64,
        seed: u64,
    ) -> (Model, Vec<Sample>, Model) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = Model::random_flat(d, r, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let point = DataPoint::rank_one(x);
                let y = predict(&truth, &point).unwrap()
                    * (1.0 + noise * rng.sample::<f64, _>(StandardNormal));
                Sample::equality(point, y)
            })
            .collect();
        let start = Model::random_flat(d, r, &mut rng).unwrap();
        (start, samples, truth)
    }

    #[test]
    fn smax_follows_the_inverse_gradient_norm_rule() {
        let (start, samples, _) = toy_problem(4, 2, 30, 0.0, 90);
        let config = BatchConfig::default();
        let (cost, bundle) = cost_and_gradient(&start, &samples, 0.0).unwrap();
        let norm = bundle.metric_norm(&start).unwrap();
        let accepted = armijo_search(&start, &bundle, norm, cost, &samples, &config).unwrap();
        let s_max = config.s0 / norm;
        let reconstructed = accepted.step * f64::powi(2.0, accepted.halvings as i32);
        assert!(
            (reconstructed - s_max).abs() <= 1e-12 * s_max,
            "step {} after {} halvings does not reproduce s_max {}",
            accepted.step,
            accepted.halvings,
            s_max
        );
        assert!(accepted.cost < cost);
    }

    #[test]
    fn already_optimal_start_stops_at_iteration_zero_with_cost_tol() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let model = Model::random_flat(5, 2, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..20)
            .map(|_| {
                let x = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
                let point = DataPoint::rank_one(x);
                let y = predict(&model, &point).unwrap();
                Sample::equality(point, y)
            })
            .collect();
        let (fitted, report) = batch_fit(&model, &samples, 0.0, &BatchConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::CostTol);
        assert!(report.iterations.is_empty());
        assert_eq!(report.final_cost, 0.0);
        assert_eq!(
            fitted.reconstruct().unwrap(),
            model.reconstruct().unwrap()
        );
    }

    #[test]
    fn noiseless_recovery_reaches_near_zero_cost() {
        let (start, samples, truth) = toy_problem(6, 2, 150, 0.0, 92);
        let oracle = empirical_cost(&truth, &samples).unwrap();
        assert_eq!(oracle, 0.0);
        let config = BatchConfig {
            max_iters: 400,
            ..BatchConfig::default()
        };
        let (_, report) = batch_fit(&start, &samples, 0.0, &config).unwrap();
        assert!(
            report.final_cost <= 1e-4,
            "final cost {} did not approach the noiseless optimum",
            report.final_cost
        );
    }

    #[test]
    fn cost_history_is_monotone_for_every_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let d = 5;
        let samples: Vec<Sample> = (0..40)
            .map(|k| {
                let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let point = DataPoint::rank_one(x);
                let relation = if k % 4 == 0 {
                    Relation::UpperBound
                } else {
                    Relation::Equality
                };
                Sample::new(point, rng.sample::<f64, _>(StandardNormal).abs() + 0.5, relation)
            })
            .collect();
        let models = vec![
            (Model::random_flat(d, 2, &mut rng).unwrap(), 0.0),
            (Model::random_polar(d, 2, &mut rng).unwrap(), 0.5),
            (Model::ConeFull(SpdMatrix::identity(d)), 0.0),
            (Model::ConeLog(DMatrix::zeros(d, d)), 0.0),
        ];
        let config = BatchConfig {
            max_iters: 25,
            ..BatchConfig::default()
        };
        for (model, lambda) in models {
            let (_, report) = batch_fit(&model, &samples, lambda, &config).unwrap();
            let costs = report.cost_history();
            assert!(!costs.is_empty(), "{}", model.geometry_name());
            for pair in costs.windows(2) {
                assert!(
                    pair[1] <= pair[0],
                    "{}: cost rose from {} to {}",
                    model.geometry_name(),
                    pair[0],
                    pair[1]
                );
            }
            assert!(report.final_cost <= costs[costs.len() - 1]);
        }
    }

    #[test]
    fn stopping_check_orders_its_three_tests() {
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        let a = Model::random_flat(4, 2, &mut rng).unwrap();
        let b = Model::random_flat(4, 2, &mut rng).unwrap();
        assert_eq!(
            stopping_check(0.0, 1.0, &a, &b, 1e-5).unwrap(),
            Some(Termination::CostTol)
        );
        assert_eq!(
            stopping_check(1.0 - 1e-6, 1.0, &a, &b, 1e-5).unwrap(),
            Some(Termination::RelCostTol)
        );
        assert_eq!(stopping_check(0.5, 1.0, &a, &b, 1e-5).unwrap(), None);
        assert_eq!(
            stopping_check(0.5, 1.0, &a, &a, 1e-5).unwrap(),
            Some(Termination::RelParamTol)
        );
    }

    #[test]
    fn exhausted_line_search_terminates_with_failure_reason() {
        let (start, samples, _) = toy_problem(4, 2, 30, 0.0, 95);
        let config = BatchConfig {
            s0: 1e12,
            max_halvings: 0,
            ..BatchConfig::default()
        };
        let (_, report) = batch_fit(&start, &samples, 0.0, &config).unwrap();
        assert_eq!(report.termination, Termination::LinesearchFailure);
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(report.iterations[0].step, 0.0);
    }

    #[test]
    fn observer_sees_initial_and_every_accepted_iterate() {
        let (start, samples, _) = toy_problem(4, 2, 30, 0.05, 96);
        let config = BatchConfig {
            max_iters: 8,
            ..BatchConfig::default()
        };
        let mut seen = Vec::new();
        let (_, report) = batch_fit_with_observer(&start, &samples, 0.0, &config, |t, m| {
            seen.push((t, m.reconstruct().unwrap()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), report.iterations.len() + 1);
        assert_eq!(seen[0].1, start.reconstruct().unwrap());
        for (idx, (t, _)) in seen.iter().enumerate() {
            assert_eq!(idx, *t);
        }
    }

    #[test]
    fn polar_lambda_endpoints_freeze_their_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let d = 6;
        let samples: Vec<Sample> = (0..30)
            .map(|_| {
                let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let point = DataPoint::rank_one(x);
                Sample::equality(point, rng.sample::<f64, _>(StandardNormal).powi(2) + 0.2)
            })
            .collect();
        let start = Model::random_polar(d, 2, &mut rng).unwrap();
        let (u0, r0) = match &start {
            Model::Polar(p) => (p.subspace().matrix().clone(), p.shape().matrix().clone()),
            _ => unreachable!(),
        };
        let config = BatchConfig {
            max_iters: 10,
            ..BatchConfig::default()
        };

        let (fitted, _) = batch_fit(&start, &samples, 1.0, &config).unwrap();
        match &fitted {
            Model::Polar(p) => {
                assert_eq!(p.shape().matrix(), &r0, "lambda=1 must not move R");
                assert!((p.subspace().matrix() - &u0).norm() > 1e-8);
            }
            _ => unreachable!(),
        }

        let (fitted, _) = batch_fit(&start, &samples, 0.0, &config).unwrap();
        match &fitted {
            Model::Polar(p) => {
                let u1 = StiefelPoint::new(u0.clone()).unwrap();
                let angles =
                    crate::geometry::principal_angles(&u1, p.subspace()).unwrap();
                assert!(
                    angles.iter().all(|a| a.abs() < 1e-12),
                    "lambda=0 must not move the subspace"
                );
                assert!((p.shape().matrix() - &r0).norm() > 1e-8);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_bad_configs_and_empty_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(98);
        let model = Model::random_flat(4, 2, &mut rng).unwrap();
        let sample = Sample::equality(
            DataPoint::rank_one(DVector::from_element(4, 1.0)),
            1.0,
        );
        assert!(batch_fit(&model, &[], 0.0, &BatchConfig::default()).is_err());
        let bad = BatchConfig {
            c: 1.5,
            ..BatchConfig::default()
        };
        assert!(batch_fit(&model, std::slice::from_ref(&sample), 0.0, &bad).is_err());
        let bad = BatchConfig {
            s0: 0.0,
            ..BatchConfig::default()
        };
        assert!(batch_fit(&model, std::slice::from_ref(&sample), 0.0, &bad).is_err());
    }
}
