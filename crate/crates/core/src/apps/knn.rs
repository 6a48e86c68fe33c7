//! k-nearest-neighbor accuracy under an arbitrary pairwise distance, scored
//! with repeated k-fold cross-validation. The distance is a black box, so
//! the same harness evaluates Mahalanobis models and learned kernels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::split::split_indices;

#[derive(Debug, Clone)]
pub struct KnnConfig {
    pub k: usize,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 5,
            folds: 2,
            repeats: 10,
            seed: 0,
        }
    }
}

/// Accuracy over all repeats x folds. `std_dev` is the population standard
/// deviation of the per-fold accuracies.
#[derive(Debug, Clone)]
pub struct KnnStats {
    pub mean: f64,
    pub std_dev: f64,
    /// One accuracy per (repeat, fold), repeats outermost.
    pub accuracies: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Classifies a point by majority vote over its k nearest training points.
/// Neighbor ranking breaks distance ties by smaller training index; vote
/// ties go to the smallest class id.
fn classify(
    distance: &(impl Fn(usize, usize) -> f64 + ?Sized),
    test_index: usize,
    train: &[usize],
    labels: &[usize],
    k: usize,
    classes: usize,
) -> usize {
    let mut ranked: Vec<(f64, usize)> = train
        .iter()
        .map(|&t| (distance(test_index, t), t))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; classes];
    for &(_, t) in ranked.iter().take(k.min(ranked.len())) {
        votes[labels[t]] += 1;
    }
    let mut winner = 0usize;
    for (class, &v) in votes.iter().enumerate() {
        if v > votes[winner] {
            winner = class;
        }
    }
    winner
}

/// Mean k-NN test accuracy over `repeats` random `folds`-fold partitions.
/// Folds are scored in parallel; results are deterministic in the seed.
pub fn knn_accuracy<D>(distance: D, labels: &[usize], config: &KnnConfig) -> Result<KnnStats>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    if config.k == 0 {
        return Err(Error::config("k must be at least 1".to_string()));
    }
    let n = labels.len();
    let splits = split_indices(n, config.folds, config.repeats, config.seed)?;
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let present: Vec<usize> = {
        let mut seen = vec![false; classes];
        for &l in labels {
            seen[l] = true;
        }
        (0..classes).filter(|&c| seen[c]).collect()
    };

    let mut tasks = Vec::new();
    for (r, repeat) in splits.iter().enumerate() {
        for f in 0..repeat.len() {
            let test = &repeat[f];
            let train: Vec<usize> = repeat
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            tasks.push((r, f, test, train));
        }
    }

    let scored: Vec<(f64, Option<String>)> = tasks
        .par_iter()
        .map(|(r, f, test, train)| {
            let mut train_seen = vec![false; classes];
            for &t in train {
                train_seen[labels[t]] = true;
            }
            let missing: Vec<usize> = present
                .iter()
                .copied()
                .filter(|&c| !train_seen[c])
                .collect();
            let warning = if missing.is_empty() {
                None
            } else {
                Some(format!(
                    "repeat {r} fold {f}: classes {missing:?} absent from the training fold"
                ))
            };
            let mut hits = 0usize;
            for &t in test.iter() {
                if classify(&distance, t, train, labels, config.k, classes) == labels[t] {
                    hits += 1;
                }
            }
            (hits as f64 / test.len() as f64, warning)
        })
        .collect();

    let accuracies: Vec<f64> = scored.iter().map(|(a, _)| *a).collect();
    let warnings: Vec<String> = scored.into_iter().filter_map(|(_, w)| w).collect();
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let var = accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / accuracies.len() as f64;
    Ok(KnnStats {
        mean,
        std_dev: var.sqrt(),
        accuracies,
        warnings,
    })
}
