//! Online (stochastic) gradient descent: annealed step schedule with
//! pre-training grid search, mini-batch accumulation that carries across
//! epoch boundaries, and the adaptive flat-geometry step rule.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::FlatFactor;
use crate::optim::report::{FitReport, IterationRecord, Termination};
use crate::regression::gradient::minibatch_cost_gradient;
use crate::regression::model::empirical_cost_over;
use crate::regression::{empirical_cost, retract_descent, sample_gradient, Model, Sample};

/// How the step size of each update is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// s_t = (s/mu) (n t0)/(n t0 + t) with t the number of samples consumed
    /// before the current mini-batch; (s, t0) come from the pre-training
    /// grid search unless overridden.
    Annealed,
    /// s_t = (eta0/(t + t_offset)) / max(||G||_F^2, 1), flat geometry only,
    /// with t the update counter.
    AdaptiveFlat { eta0: f64, t_offset: f64 },
}

#[derive(Debug, Clone)]
pub struct OnlineConfig {
    /// Full passes over the data.
    pub epochs: usize,
    /// Samples accumulated per retraction.
    pub batch_size: usize,
    /// Exponents k: the grid tries s = 2^k and t0 = 2^k.
    pub grid_exponents: Vec<i32>,
    /// Fraction of the data (capped at 1024 samples) used by the grid search.
    pub pretrain_fraction: f64,
    /// Seed for epoch shuffling and pre-training subset selection.
    pub seed: u64,
    pub step_rule: StepRule,
    /// Fixed (s, t0), skipping the pre-training grid search.
    pub step_override: Option<(f64, f64)>,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            epochs: 1,
            batch_size: 32,
            grid_exponents: (-3..=3).collect(),
            pretrain_fraction: 0.1,
            seed: 0,
            step_rule: StepRule::Annealed,
            step_override: None,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("online fit needs at least one epoch".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::config("mini-batch size must be at least 1".to_string()));
        }
        if !(self.pretrain_fraction > 0.0 && self.pretrain_fraction <= 1.0) {
            return Err(Error::config(format!(
                "pre-training fraction must lie in (0, 1], got {}",
                self.pretrain_fraction
            )));
        }
        if self.grid_exponents.is_empty() && self.step_override.is_none() {
            return Err(Error::config(
                "the step grid is empty and no override was given".to_string(),
            ));
        }
        if let Some((s, t0)) = self.step_override {
            if !(s > 0.0 && s.is_finite() && t0 > 0.0 && t0.is_finite()) {
                return Err(Error::config(format!(
                    "step override needs positive finite (s, t0), got ({s}, {t0})"
                )));
            }
        }
        if let StepRule::AdaptiveFlat { eta0, t_offset } = self.step_rule {
            if !(eta0 > 0.0 && eta0.is_finite() && t_offset > 0.0 && t_offset.is_finite()) {
                return Err(Error::config(format!(
                    "adaptive rule needs positive finite (eta0, t_offset), got ({eta0}, {t_offset})"
                )));
            }
        }
        Ok(())
    }
}

/// Annealed schedule s_t = (s/mu_grad) (n t0)/(n t0 + t).
#[derive(Debug, Clone, Copy)]
pub struct StepSchedule {
    pub s: f64,
    pub mu_grad: f64,
    pub n: f64,
    pub t0: f64,
}

impl StepSchedule {
    pub fn step_at(&self, t: u64) -> f64 {
        (self.s / self.mu_grad) * (self.n * self.t0) / (self.n * self.t0 + t as f64)
    }
}

/// Free-function form of the schedule evaluation.
pub fn step_schedule(schedule: &StepSchedule, t: u64) -> f64 {
    schedule.step_at(t)
}

/// Adaptive flat step: eta_t / max(||G||_F^2, 1).
pub fn adaptive_step_flat(g: &FlatFactor, eta_t: f64) -> f64 {
    eta_t / g.matrix().norm_squared().max(1.0)
}

/// Mean per-sample metric gradient norm over the first min(256, n) samples
/// in input order, evaluated at the starting model. Falls back to 1.0 when
/// the estimate is zero or non-finite so the schedule stays defined.
pub fn estimate_grad_scale(model: &Model, samples: &[Sample], lambda: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config("gradient scale needs at least one sample".to_string()));
    }
    let take = samples.len().min(256);
    let mut acc = 0.0;
    for sample in &samples[..take] {
        let bundle = sample_gradient(model, sample, lambda)?;
        acc += bundle.metric_norm(model)?;
    }
    let mean = acc / take as f64;
    if mean > 0.0 && mean.is_finite() {
        Ok(mean)
    } else {
        Ok(1.0)
    }
}

/// Candidate (s, t0) pairs: the cartesian square of 2^k over the exponent
/// list, ordered with s ascending, then t0 ascending.
pub fn step_grid(exponents: &[i32]) -> Vec<(f64, f64)> {
    let mut sorted = exponents.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut grid = Vec::with_capacity(sorted.len() * sorted.len());
    for &ks in &sorted {
        for &kt in &sorted {
            grid.push((f64::powi(2.0, ks), f64::powi(2.0, kt)));
        }
    }
    grid
}

/// Concatenated per-epoch sample orders: one seeded uniform permutation of
/// 0..n per epoch. Both `online_fit` and any reference update loop that
/// wants to reproduce its iterates must consume exactly this order.
pub fn shuffled_epoch_order(n: usize, epochs: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut order = Vec::with_capacity(n * epochs);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        perm.shuffle(&mut rng);
        order.extend_from_slice(&perm);
    }
    order
}

fn pretrain_subset(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let want = ((fraction * n as f64).ceil() as usize).clamp(1, 1024).min(n);
    perm.truncate(want);
    // Sorted so that the rehearsal stream below reduces to the real run's
    // sample order whenever the subset covers the whole data set.
    perm.sort_unstable();
    perm
}

/// Short online rehearsal per grid candidate: each candidate is driven for
/// `config.epochs` epochs over a random subset, shuffled with the same stream
/// the real run uses (so a subset covering the whole data set rehearses the
/// run exactly). Returns the (s, t0) with the lowest final subset cost. Ties
/// go to the smaller s, then the smaller t0 (the iteration order guarantees
/// this). Candidates that diverge or end with a higher subset cost than they
/// started with are skipped; if nothing survives the search fails.
pub fn pretrain_grid_search(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
    config: &OnlineConfig,
    mu_grad: f64,
) -> Result<(f64, f64)> {
    let subset = pretrain_subset(samples.len(), config.pretrain_fraction, config.seed);
    let initial = empirical_cost_over(model, subset.iter().map(|&i| &samples[i]))?;
    let order: Vec<usize> = shuffled_epoch_order(subset.len(), config.epochs, config.seed)
        .into_iter()
        .map(|j| subset[j])
        .collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for (s, t0) in step_grid(&config.grid_exponents) {
        let schedule = StepSchedule {
            s,
            mu_grad,
            n: subset.len() as f64,
            t0,
        };
        let mut candidate = model.clone();
        let mut records = Vec::new();
        let outcome = drive_stream(
            &mut candidate,
            samples,
            &order,
            lambda,
            config.batch_size,
            &mut |_, consumed, _| schedule.step_at(consumed),
            &mut records,
            &mut |_, _| Ok(()),
            Instant::now(),
            f64::NAN,
        );
        if outcome.is_err() {
            continue;
        }
        let cost = match empirical_cost_over(&candidate, subset.iter().map(|&i| &samples[i])) {
            Ok(c) if c.is_finite() && c <= initial => c,
            _ => continue,
        };
        if best.map_or(true, |(b, _, _)| cost < b) {
            best = Some((cost, s, t0));
        }
    }
    match best {
        Some((_, s, t0)) => Ok((s, t0)),
        None => Err(Error::config(
            "every pre-training step candidate diverged or failed to improve on the subset"
                .to_string(),
        )),
    }
}

/// Runs the mini-batch stream over `order`, mutating `current` in place and
/// appending one record per retraction. Any failure inside an update is
/// surfaced as a divergence error carrying the partial report.
#[allow(clippy::too_many_arguments)]
fn drive_stream(
    current: &mut Model,
    samples: &[Sample],
    order: &[usize],
    lambda: f64,
    batch_size: usize,
    step_of: &mut dyn FnMut(&Model, u64, u64) -> f64,
    records: &mut Vec<IterationRecord>,
    observer: &mut dyn FnMut(u64, &Model) -> Result<()>,
    started: Instant,
    initial_cost: f64,
) -> Result<()> {
    let mut consumed: u64 = 0;
    let mut updates: u64 = 0;
    let mut buffer: Vec<usize> = Vec::with_capacity(batch_size);

    let flush = |buffer: &mut Vec<usize>,
                     current: &mut Model,
                     consumed: &mut u64,
                     updates: &mut u64,
                     records: &mut Vec<IterationRecord>,
                     step_of: &mut dyn FnMut(&Model, u64, u64) -> f64,
                     observer: &mut dyn FnMut(u64, &Model) -> Result<()>|
     -> Result<()> {
        let step = step_of(current, *consumed, *updates);
        let update_result = (|| -> Result<(f64, f64, Model)> {
            let (cost, bundle) =
                minibatch_cost_gradient(current, buffer.iter().map(|&i| &samples[i]), lambda)?;
            let grad_norm = bundle.metric_norm(current)?;
            if !cost.is_finite() || !grad_norm.is_finite() || !step.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite mini-batch quantities (cost {cost}, grad norm {grad_norm}, step {step})"
                )));
            }
            let next = retract_descent(current, &bundle, step)?;
            Ok((cost, grad_norm, next))
        })();
        match update_result {
            Ok((cost, grad_norm, next)) => {
                records.push(IterationRecord {
                    cost,
                    step,
                    grad_norm,
                    halvings: 0,
                    elapsed_seconds: started.elapsed().as_secs_f64(),
                });
                *current = next;
                *consumed += buffer.len() as u64;
                *updates += 1;
                buffer.clear();
                observer(*updates, current)
            }
            Err(_) => {
                let final_cost = records.last().map_or(initial_cost, |r| r.cost);
                Err(Error::Divergence {
                    update: *updates as usize,
                    report: Box::new(FitReport {
                        termination: Termination::Diverged,
                        initial_cost,
                        final_cost,
                        iterations: std::mem::take(records),
                    }),
                })
            }
        }
    };

    for &idx in order {
        buffer.push(idx);
        if buffer.len() == batch_size {
            flush(
                &mut buffer,
                current,
                &mut consumed,
                &mut updates,
                records,
                step_of,
                observer,
            )?;
        }
    }
    if !buffer.is_empty() {
        flush(
            &mut buffer,
            current,
            &mut consumed,
            &mut updates,
            records,
            step_of,
            observer,
        )?;
    }
    Ok(())
}

/// Online fit over `config.epochs` shuffled passes. Annealed runs estimate
/// the gradient scale at the start and pick (s, t0) by grid search unless
/// overridden; the adaptive rule applies to flat models only.
pub fn online_fit(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
    config: &OnlineConfig,
) -> Result<(Model, FitReport)> {
    online_fit_with_observer(model, samples, lambda, config, |_, _| Ok(()))
}

/// `online_fit` that hands the iterate to `observer` after every update,
/// with the 1-based update counter.
pub fn online_fit_with_observer(
    model: &Model,
    samples: &[Sample],
    lambda: f64,
    config: &OnlineConfig,
    mut observer: impl FnMut(u64, &Model) -> Result<()>,
) -> Result<(Model, FitReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::config("online fit needs at least one sample".to_string()));
    }
    let started = Instant::now();
    let initial_cost = empirical_cost(model, samples)?;

    let mut step_of: Box<dyn FnMut(&Model, u64, u64) -> f64> = match config.step_rule {
        StepRule::Annealed => {
            let mu_grad = estimate_grad_scale(model, samples, lambda)?;
            let (s, t0) = match config.step_override {
                Some(pair) => pair,
                None => pretrain_grid_search(model, samples, lambda, config, mu_grad)?,
            };
            let schedule = StepSchedule {
                s,
                mu_grad,
                n: samples.len() as f64,
                t0,
            };
            Box::new(move |_, consumed, _| schedule.step_at(consumed))
        }
        StepRule::AdaptiveFlat { eta0, t_offset } => {
            if !matches!(model, Model::Flat(_)) {
                return Err(Error::config(
                    "the adaptive step rule applies to the flat geometry only".to_string(),
                ));
            }
            Box::new(move |m, _, updates| match m {
                Model::Flat(g) => adaptive_step_flat(g, eta0 / (updates as f64 + t_offset)),
                _ => unreachable!("validated as flat above"),
            })
        }
    };

    let order = shuffled_epoch_order(samples.len(), config.epochs, config.seed);
    let mut current = model.clone();
    let mut records = Vec::new();
    drive_stream(
        &mut current,
        samples,
        &order,
        lambda,
        config.batch_size,
        &mut step_of,
        &mut records,
        &mut observer,
        started,
        initial_cost,
    )?;

    let final_cost = empirical_cost(&current, samples)?;
    if !final_cost.is_finite() {
        let last = records.last().map_or(initial_cost, |r| r.cost);
        return Err(Error::Divergence {
            update: records.len(),
            report: Box::new(FitReport {
                termination: Termination::Diverged,
                initial_cost,
                final_cost: last,
                iterations: records,
            }),
        });
    }
    Ok((
        current,
        FitReport {
            termination: Termination::EpochsDone,
            initial_cost,
            final_cost,
            iterations: records,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{predict, DataPoint, Sample};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_distr::StandardNormal;

    // Unit-norm probes keep residuals and per-sample gradients bounded so the
    // annealed schedules stay in their stable regime.
    fn toy(d: usize, r: usize, n: usize, seed: u64) -> (Model, Vec<Sample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = Model::random_flat(d, r, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                let mut x =
                    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                x /= x.norm();
                let point = DataPoint::rank_one(x);
                let y = predict(&truth, &point).unwrap();
                Sample::equality(point, y)
            })
            .collect();
        let start = Model::random_flat(d, r, &mut rng).unwrap();
        (start, samples)
    }

    #[test]
    fn schedule_matches_plugin_values_and_decreases() {
        let schedule = StepSchedule {
            s: 1.0,
            mu_grad: 2.0,
            n: 100.0,
            t0: 1.0,
        };
        assert_eq!(step_schedule(&schedule, 0), 0.5);
        let at_nt0 = schedule.step_at(100);
        assert!((at_nt0 - 0.25).abs() < 1e-15);
        let mut t = 1u64;
        let mut last = schedule.step_at(0);
        while t <= 1_000_000 {
            let s = schedule.step_at(t);
            assert!(s < last && s > 0.0);
            last = s;
            t *= 4;
        }
    }

    #[test]
    fn adaptive_step_clamps_small_factors_at_one() {
        let g = FlatFactor::new(DMatrix::from_column_slice(2, 1, &[0.5, 0.0])).unwrap();
        assert_eq!(adaptive_step_flat(&g, 0.3), 0.3);
        let g = FlatFactor::new(DMatrix::from_column_slice(2, 1, &[2.0, 0.0])).unwrap();
        assert_eq!(adaptive_step_flat(&g, 0.1), 0.025);
    }

    #[test]
    fn grid_has_forty_nine_candidates_in_tie_break_order() {
        let grid = step_grid(&(-3..=3).collect::<Vec<_>>());
        assert_eq!(grid.len(), 49);
        assert_eq!(grid[0], (0.125, 0.125));
        assert_eq!(grid[48], (8.0, 8.0));
        for pair in grid.windows(2) {
            let (s0, t0) = pair[0];
            let (s1, t1) = pair[1];
            assert!(s1 > s0 || (s1 == s0 && t1 > t0));
        }
    }

    #[test]
    fn pretraining_then_fit_does_not_increase_cost() {
        let (start, samples) = toy(5, 2, 120, 100);
        let config = OnlineConfig {
            epochs: 2,
            batch_size: 8,
            seed: 7,
            pretrain_fraction: 1.0,
            ..OnlineConfig::default()
        };
        let (_, report) = online_fit(&start, &samples, 0.0, &config).unwrap();
        assert_eq!(report.termination, Termination::EpochsDone);
        assert!(
            report.final_cost <= report.initial_cost,
            "cost rose from {} to {}",
            report.initial_cost,
            report.final_cost
        );
    }

    #[test]
    fn fixed_seed_reproduces_iterates_bitwise() {
        let (start, samples) = toy(5, 2, 80, 101);
        let config = OnlineConfig {
            epochs: 2,
            batch_size: 4,
            seed: 11,
            pretrain_fraction: 1.0,
            ..OnlineConfig::default()
        };
        let (a, ra) = online_fit(&start, &samples, 0.0, &config).unwrap();
        let (b, rb) = online_fit(&start, &samples, 0.0, &config).unwrap();
        let (wa, wb) = (a.reconstruct().unwrap(), b.reconstruct().unwrap());
        for (x, y) in wa.iter().zip(wb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(ra.step_history(), rb.step_history());
    }

    #[test]
    fn batch_size_one_is_bitwise_plain_sgd() {
        let (start, samples) = toy(5, 2, 60, 102);
        let lambda = 0.0;
        let config = OnlineConfig {
            epochs: 2,
            batch_size: 1,
            seed: 3,
            step_override: Some((0.0625, 2.0)),
            ..OnlineConfig::default()
        };

        let mut online_states: Vec<DMatrix<f64>> = Vec::new();
        let (fitted, _) = online_fit_with_observer(&start, &samples, lambda, &config, |_, m| {
            online_states.push(m.reconstruct().unwrap());
            Ok(())
        })
        .unwrap();

        // Reference loop: plain SGD with the same schedule and sample order.
        let mu_grad = estimate_grad_scale(&start, &samples, lambda).unwrap();
        let schedule = StepSchedule {
            s: 0.0625,
            mu_grad,
            n: samples.len() as f64,
            t0: 2.0,
        };
        let order = shuffled_epoch_order(samples.len(), config.epochs, config.seed);
        let mut current = start.clone();
        for (t, &idx) in order.iter().enumerate() {
            let bundle = sample_gradient(&current, &samples[idx], lambda).unwrap();
            let step = schedule.step_at(t as u64);
            current = retract_descent(&current, &bundle, step).unwrap();
            let w_ref = current.reconstruct().unwrap();
            for (x, y) in w_ref.iter().zip(online_states[t].iter()) {
                assert_eq!(x.to_bits(), y.to_bits(), "iterates diverged at update {t}");
            }
        }
        let (wa, wb) = (
            fitted.reconstruct().unwrap(),
            current.reconstruct().unwrap(),
        );
        for (x, y) in wa.iter().zip(wb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn trailing_partial_batch_is_flushed() {
        let (start, samples) = toy(4, 2, 5, 103);
        let config = OnlineConfig {
            epochs: 1,
            batch_size: 2,
            seed: 1,
            step_override: Some((0.125, 1.0)),
            ..OnlineConfig::default()
        };
        let mut updates = 0u64;
        let (_, report) = online_fit_with_observer(&start, &samples, 0.0, &config, |u, _| {
            updates = u;
            Ok(())
        })
        .unwrap();
        assert_eq!(updates, 3, "5 samples at p=2 must flush 2+2+1");
        assert_eq!(report.iterations.len(), 3);
    }

    #[test]
    fn accumulation_carries_across_epoch_boundaries() {
        let (start, samples) = toy(4, 2, 5, 104);
        let config = OnlineConfig {
            epochs: 2,
            batch_size: 2,
            seed: 1,
            step_override: Some((0.125, 1.0)),
            ..OnlineConfig::default()
        };
        let (_, report) = online_fit(&start, &samples, 0.0, &config).unwrap();
        // 10 streamed samples at p=2: exactly 5 updates, none dropped at the
        // epoch boundary.
        assert_eq!(report.iterations.len(), 5);
    }

    #[test]
    fn absurd_override_step_diverges_with_partial_report() {
        let (start, samples) = toy(4, 2, 40, 105);
        let config = OnlineConfig {
            epochs: 3,
            batch_size: 4,
            seed: 2,
            step_override: Some((1e30, 1.0)),
            ..OnlineConfig::default()
        };
        match online_fit(&start, &samples, 0.0, &config) {
            Err(Error::Divergence { update, report }) => {
                assert_eq!(report.termination, Termination::Diverged);
                assert_eq!(report.iterations.len(), update);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn adaptive_rule_requires_flat_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let start = Model::random_polar(4, 2, &mut rng).unwrap();
        let (_, samples) = toy(4, 2, 20, 107);
        let config = OnlineConfig {
            step_rule: StepRule::AdaptiveFlat {
                eta0: 1.0,
                t_offset: 10.0,
            },
            ..OnlineConfig::default()
        };
        assert!(matches!(
            online_fit(&start, &samples, 0.5, &config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_residual_start_falls_back_to_unit_grad_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(108);
        let model = Model::random_flat(4, 2, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..10)
            .map(|_| {
                let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                let point = DataPoint::rank_one(x);
                let y = predict(&model, &point).unwrap();
                Sample::equality(point, y)
            })
            .collect();
        assert_eq!(estimate_grad_scale(&model, &samples, 0.0).unwrap(), 1.0);
    }
}
