//! Lloyd's K-means over embedding rows, restarted from seeded random
//! initializations, and normalized mutual information against reference
//! labels.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{sym_eigen, spd_exp_parts};
use crate::regression::Model;

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    /// Cluster centers, one row per cluster.
    pub centroids: DMatrix<f64>,
    /// Sum of squared distances to assigned centroids.
    pub objective: f64,
    /// Index of the restart that won.
    pub restart: usize,
    pub iterations: usize,
}

/// Rows of the low-rank factor of W, one embedding per sample: G for flat
/// models, U R for polar ones, and the eigen square root for the full-rank
/// cone geometries. The embedding Gram matrix reproduces W.
pub fn embedding_rows(model: &Model) -> Result<DMatrix<f64>> {
    Ok(match model {
        Model::Flat(g) => g.matrix().clone(),
        Model::Polar(p) => p.subspace().matrix() * p.shape().matrix(),
        Model::ConeFull(w) => {
            let (vals, vecs) = sym_eigen(w.matrix());
            scaled_columns(&vecs, &vals.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>())
        }
        Model::ConeLog(s) => {
            let (_, vals, vecs) = spd_exp_parts(s)?;
            scaled_columns(&vecs, &vals.iter().map(|v| (v / 2.0).exp()).collect::<Vec<_>>())
        }
    })
}

fn scaled_columns(vecs: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    let mut out = vecs.clone();
    for (col, &s) in scales.iter().enumerate() {
        for row in 0..out.nrows() {
            out[(row, col)] *= s;
        }
    }
    out
}

/// Seeded K-means with restarts. Each restart samples c distinct rows as
/// initial centroids (stream = restart index); the restart with the lowest
/// objective wins, earliest restart on ties.
pub fn kmeans(points: &DMatrix<f64>, c: usize, restarts: usize, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    if c == 0 || c > n {
        return Err(Error::config(format!(
            "k-means needs 1 <= clusters <= {n}, got {c}"
        )));
    }
    if restarts == 0 {
        return Err(Error::config("at least one restart is required".to_string()));
    }
    let mut best: Option<KmeansResult> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let chosen = sample(&mut rng, n, c);
        let mut centroids = DMatrix::zeros(c, points.ncols());
        for (k, idx) in chosen.iter().enumerate() {
            centroids.set_row(k, &points.row(idx));
        }
        let mut result = lloyd(points, centroids);
        result.restart = restart;
        let better = match &best {
            None => true,
            Some(b) => result.objective < b.objective,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// One Lloyd descent from explicit initial centroids. Assignment ties pick
/// the smallest cluster index; a cluster left empty is re-seeded from the
/// point farthest from its current centroid.
fn lloyd(points: &DMatrix<f64>, mut centroids: DMatrix<f64>) -> KmeansResult {
    let n = points.nrows();
    let c = centroids.nrows();
    let mut assignments = vec![0usize; n];
    let mut iterations = 0usize;
    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        // Assign.
        let mut changed = false;
        let mut dist = vec![0.0f64; n];
        for i in 0..n {
            let mut best_k = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..c {
                let d = row_distance_sq(points, i, &centroids, k);
                if d < best_d {
                    best_d = d;
                    best_k = k;
                }
            }
            dist[i] = best_d;
            if assignments[i] != best_k {
                assignments[i] = best_k;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        // Re-seed empty clusters from the farthest points.
        let mut counts = vec![0usize; c];
        for &a in &assignments {
            counts[a] += 1;
        }
        for k in 0..c {
            if counts[k] > 0 {
                continue;
            }
            let farthest = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("a cluster with more than one point exists when another is empty");
            counts[assignments[farthest]] -= 1;
            assignments[farthest] = k;
            counts[k] = 1;
            dist[farthest] = 0.0;
        }
        // Update.
        centroids.fill(0.0);
        for i in 0..n {
            for j in 0..points.ncols() {
                centroids[(assignments[i], j)] += points[(i, j)];
            }
        }
        for k in 0..c {
            let inv = 1.0 / counts[k] as f64;
            for j in 0..centroids.ncols() {
                centroids[(k, j)] *= inv;
            }
        }
    }
    let mut objective = 0.0;
    for i in 0..n {
        objective += row_distance_sq(points, i, &centroids, assignments[i]);
    }
    KmeansResult {
        assignments,
        centroids,
        objective,
        restart: 0,
        iterations,
    }
}

fn row_distance_sq(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, k: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..points.ncols() {
        let d = points[(i, j)] - centroids[(k, j)];
        acc += d * d;
    }
    acc
}

/// NMI = 2 I(A;B) / (H(A) + H(B)) in [0, 1]. Two trivial (single-cluster)
/// partitions are identical, so the degenerate 0/0 case scores 1.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension(format!(
            "partitions label {} and {} points",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::data("cannot score empty partitions".to_string()));
    }
    let n = a.len() as f64;
    let ca = a.iter().max().unwrap() + 1;
    let cb = b.iter().max().unwrap() + 1;
    let mut joint = vec![vec![0usize; cb]; ca];
    for (&x, &y) in a.iter().zip(b.iter()) {
        joint[x][y] += 1;
    }
    let ma: Vec<usize> = (0..ca).map(|x| joint[x].iter().sum()).collect();
    let mb: Vec<usize> = (0..cb).map(|y| (0..ca).map(|x| joint[x][y]).sum()).collect();

    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = entropy(&ma);
    let hb = entropy(&mb);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }

    let mut mi = 0.0;
    for x in 0..ca {
        for y in 0..cb {
            if joint[x][y] == 0 {
                continue;
            }
            let pxy = joint[x][y] as f64 / n;
            let px = ma[x] as f64 / n;
            let py = mb[y] as f64 / n;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlatFactor;

    fn blob_points() -> (DMatrix<f64>, Vec<usize>) {
        let n = 30;
        let points = DMatrix::from_fn(n, 2, |i, j| {
            let c = i / 10;
            10.0 * c as f64 + 0.1 * ((i * 7 + j * 3) % 5) as f64
        });
        let labels = (0..n).map(|i| i / 10).collect();
        (points, labels)
    }

    #[test]
    fn recovers_well_separated_blobs() {
        let (points, labels) = blob_points();
        let result = kmeans(&points, 3, 5, 0).unwrap();
        let nmi = normalized_mutual_information(&result.assignments, &labels).unwrap();
        assert!(nmi > 1.0 - 1e-12, "nmi {nmi}");
        // Within-cluster offsets are at most 0.4 per coordinate.
        assert!(result.objective < 2.0, "objective {}", result.objective);
    }

    #[test]
    fn identical_partitions_score_one_and_trivial_scores_zero() {
        let labels = vec![0, 0, 1, 1, 2, 2];
        assert_eq!(
            normalized_mutual_information(&labels, &labels).unwrap(),
            1.0
        );
        let single = vec![0; 6];
        assert_eq!(
            normalized_mutual_information(&single, &labels).unwrap(),
            0.0
        );
        // Both trivial: identical single-cluster partitions.
        assert_eq!(
            normalized_mutual_information(&single, &single).unwrap(),
            1.0
        );
    }

    #[test]
    fn contingency_oracle_three_clusters() {
        // Joint counts: [[3,1,0],[0,2,2],[1,0,3]] over n = 12.
        let a = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let b = vec![0, 0, 0, 1, 1, 1, 2, 2, 0, 2, 2, 2];
        let got = normalized_mutual_information(&a, &b).unwrap();

        // Independent direct evaluation of the entropy formula.
        let n = 12.0f64;
        let joint: [[f64; 3]; 3] = [[3.0, 1.0, 0.0], [0.0, 2.0, 2.0], [1.0, 0.0, 3.0]];
        let pa: [f64; 3] = [4.0 / n, 4.0 / n, 4.0 / n];
        let pb: [f64; 3] = [4.0 / n, 3.0 / n, 5.0 / n];
        let mut mi = 0.0;
        for x in 0..3 {
            for y in 0..3 {
                let pxy = joint[x][y] / n;
                if pxy > 0.0 {
                    mi += pxy * (pxy / (pa[x] * pb[y])).ln();
                }
            }
        }
        let ha: f64 = -pa.iter().map(|p| p * p.ln()).sum::<f64>();
        let hb: f64 = -pb.iter().map(|p| p * p.ln()).sum::<f64>();
        let expect = 2.0 * mi / (ha + hb);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn nmi_is_symmetric_and_permutation_invariant() {
        let a = vec![0, 1, 1, 2, 0, 2, 1, 0];
        let b = vec![1, 1, 0, 2, 2, 0, 0, 1];
        let ab = normalized_mutual_information(&a, &b).unwrap();
        let ba = normalized_mutual_information(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-15);
        // Swap ids 0 <-> 2 in a.
        let swapped: Vec<usize> = a.iter().map(|&x| match x {
            0 => 2,
            2 => 0,
            other => other,
        }).collect();
        let swapped_score = normalized_mutual_information(&swapped, &b).unwrap();
        assert!((ab - swapped_score).abs() < 1e-15);
    }

    #[test]
    fn empty_clusters_are_reseeded_from_the_farthest_point() {
        // Both initial centroids coincide at 0, so cluster 1 starts empty and
        // must be re-seeded from the farthest point (9.0).
        let points = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, 9.0]);
        let init = DMatrix::from_column_slice(2, 1, &[0.0, 0.0]);
        let result = lloyd(&points, init);
        let mut counts = [0usize; 2];
        for &a in &result.assignments {
            counts[a] += 1;
        }
        assert_eq!(counts, [3, 1]);
        assert_eq!(result.assignments[3], 1);
        assert!(result.objective < 1e-12);
    }

    #[test]
    fn seeded_runs_are_deterministic_and_pick_the_best_restart() {
        let (points, _) = blob_points();
        let a = kmeans(&points, 3, 4, 9).unwrap();
        let b = kmeans(&points, 3, 4, 9).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.restart, b.restart);
        assert!(kmeans(&points, 0, 1, 0).is_err());
        assert!(kmeans(&points, 31, 1, 0).is_err());
        assert!(kmeans(&points, 2, 0, 0).is_err());
    }

    #[test]
    fn embeddings_reproduce_the_model_gram() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 2.0]);
        let model = Model::Flat(FlatFactor::new(g.clone()).unwrap());
        let e = embedding_rows(&model).unwrap();
        assert_eq!(e, g);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [
            Model::random_polar(4, 2, &mut rng).unwrap(),
            Model::identity("cone-affine", 3, 3).unwrap(),
            Model::ConeLog(DMatrix::zeros(3, 3)),
        ] {
            let e = embedding_rows(&model).unwrap();
            let w = model.reconstruct().unwrap();
            let gram = &e * e.transpose();
            assert!(
                (&gram - &w).norm() <= 1e-10 * (1.0 + w.norm()),
                "{} gram mismatch",
                model.geometry_name()
            );
        }
    }
}
