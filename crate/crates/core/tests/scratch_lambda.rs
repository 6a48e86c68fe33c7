//! Temporary diagnostic for the lambda-insensitivity criterion.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use psdreg::optim::{batch_fit, BatchConfig};
use psdreg::regression::{empirical_cost, predict, DataPoint, Model, Sample};

fn pairs(truth: &Model, n: usize, noise: f64, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let d = truth.dim();
    (0..n)
        .map(|_| {
            let mut x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            x /= x.norm();
            let y = predict(truth, &DataPoint::rank_one(x.clone())).unwrap()
                + noise * rng.sample::<f64, _>(StandardNormal);
            Sample::equality(DataPoint::rank_one(x), y)
        })
        .collect()
}

#[test]
#[ignore]
fn lambda_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let truth = Model::random_flat(10, 5, &mut rng).unwrap();
    let train = pairs(&truth, 500, 0.1, &mut rng);
    let test = pairs(&truth, 500, 0.1, &mut rng);

    // Moment init: H = mean(y x x'), E[H] = 2 W* + tr(W*) I. The bottom
    // eigenvalues estimate the trace shift, the top ones the spectrum.
    let mut moment = nalgebra::DMatrix::zeros(10, 10);
    for s in &train {
        if let DataPoint::RankOne(x) = &s.point {
            moment.ger(s.target / train.len() as f64, x, x, 1.0);
        }
    }
    let mut eig: Vec<f64> = moment.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let shift = eig[5..].iter().sum::<f64>() / 5.0;
    let init = psdreg::apps::spectral_init(&moment, 5).unwrap();
    // Unit-sphere inputs: E[y x x'] = (2 W* + tr(W*) I)/(d(d+2)), so the
    // spectrum estimate needs the d(d+2)/2 rescale after the trace shift.
    let rescale = 10.0 * 12.0 / 2.0;
    let scaled: Vec<f64> = init
        .eigenvalues
        .iter()
        .map(|v| ((v - shift) * rescale).max(1e-3))
        .collect();
    let start = Model::from_scaled_subspace("polar", &init.subspace, &scaled).unwrap();
    let config = BatchConfig {
        eps_tol: 1e-5,
        max_iters: 2000,
        ..BatchConfig::default()
    };
    let mut out = std::io::stdout().lock();
    use std::io::Write;
    for k in 1..=9 {
        let lambda = k as f64 / 10.0;
        let (fitted, report) = batch_fit(&start, &train, lambda, &config).unwrap();
        let test_cost = empirical_cost(&fitted, &test).unwrap();
        writeln!(
            out,
            "lambda {lambda:.1}: train {:.4e} test {test_cost:.4e} iters {} stop {}",
            report.final_cost,
            report.iterations.len(),
            report.termination.label()
        )
        .unwrap();
    }
}
