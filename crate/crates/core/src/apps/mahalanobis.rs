//! Mahalanobis distances under a learned PSD matrix and distance-constraint
//! generation for metric learning over labeled features.

use rand::Rng;

use nalgebra::DVector;

use crate::apps::constraints::{ClassBalance, ConstraintRecord, ConstraintSet};
use crate::apps::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::regression::{DataPoint, Model, Prepared, Relation};

/// d_W(x_i, x_j) = (x_i - x_j)' W (x_i - x_j), clamped at zero against
/// rounding. With W = I this is the squared Euclidean distance; a low-rank W
/// makes it a pseudo-distance that vanishes on the null space.
pub fn mahalanobis_distance(
    prepared: &Prepared<'_>,
    xi: &DVector<f64>,
    xj: &DVector<f64>,
) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(Error::dimension(format!(
            "points have dimensions {} and {}",
            xi.len(),
            xj.len()
        )));
    }
    let point = DataPoint::rank_one(xi - xj);
    Ok(prepared.predict(&point)?.max(0.0))
}

/// Linear-interpolation percentile of an ascending-sorted slice, with p in
/// [0, 100]: index h = (len - 1) p / 100, interpolated between neighbors.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::data("percentile of an empty set".to_string()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::config(format!(
            "percentile rank must lie in [0, 100], got {p}"
        )));
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Paper-default number of constraints for a c-class problem: 40 c (c - 1).
pub fn default_constraint_count(classes: usize) -> usize {
    40 * classes * classes.saturating_sub(1)
}

/// Calibrates targets from the baseline metric and samples constraints:
/// l and u are the 5th and 95th percentiles of the baseline distance over a
/// probe of min(10^4, n(n-1)/2) pairs; same-class pairs must come closer
/// than l, cross-class pairs must stay farther than u.
pub fn generate_mahalanobis_constraints(
    dataset: &LabeledDataset,
    baseline: &Model,
    count: usize,
    rng: &mut impl Rng,
) -> Result<ConstraintSet> {
    if count == 0 {
        return Err(Error::config("at least one constraint is required".to_string()));
    }
    let n = dataset.len();
    let prepared = Prepared::new(baseline)?;

    let total_pairs = n * (n - 1) / 2;
    let probe_cap = 10_000usize;
    let mut probe = Vec::with_capacity(total_pairs.min(probe_cap));
    if total_pairs <= probe_cap {
        for i in 0..n {
            for j in (i + 1)..n {
                probe.push(distance_between(&prepared, dataset, i, j)?);
            }
        }
    } else {
        for _ in 0..probe_cap {
            let (i, j) = draw_pair(n, rng);
            probe.push(distance_between(&prepared, dataset, i, j)?);
        }
    }
    probe.sort_by(f64::total_cmp);
    let l = percentile(&probe, 5.0)?;
    let u = percentile(&probe, 95.0)?;
    if !(u > 0.0) {
        return Err(Error::config(
            "baseline distances are all zero (identical features); \
             cannot calibrate constraint targets"
                .to_string(),
        ));
    }

    let labels = dataset.labels();
    let mut records = Vec::with_capacity(count);
    let mut balance = ClassBalance::default();
    for _ in 0..count {
        let (i, j) = draw_pair(n, rng);
        let (target, relation) = if labels[i] == labels[j] {
            balance.same_class += 1;
            (l, Relation::UpperBound)
        } else {
            balance.cross_class += 1;
            (u, Relation::LowerBound)
        };
        records.push(ConstraintRecord {
            i,
            j,
            target,
            relation,
        });
    }

    let mut set = ConstraintSet::new(records)?;
    let mut warnings = Vec::new();
    if balance.cross_class == 0 {
        warnings.push(
            "all sampled pairs share a class; only upper bounds were generated".to_string(),
        );
    }
    set.balance = Some(balance);
    set.warnings = warnings;
    Ok(set)
}

fn draw_pair(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn distance_between(
    prepared: &Prepared<'_>,
    dataset: &LabeledDataset,
    i: usize,
    j: usize,
) -> Result<f64> {
    let xi = dataset.feature_row(i);
    let xj = dataset.feature_row(j);
    mahalanobis_distance(prepared, &xi, &xj)
}
