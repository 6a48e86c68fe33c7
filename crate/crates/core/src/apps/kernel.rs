//! Kernels over a fixed sample set and distance-constraint generation for
//! transductive kernel learning, where the learned model W is itself an
//! n x n kernel matrix.

use nalgebra::DMatrix;
use rand::Rng;

use crate::apps::constraints::{ClassBalance, ConstraintRecord, ConstraintSet};
use crate::error::{Error, Result};
use crate::geometry::{sym, sym_eigen};
use crate::regression::Relation;

/// How the base kernel is computed from feature rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// K_ij = x_i . x_j
    Linear,
    /// K_ij = exp(-gamma |x_i - x_j|^2)
    Rbf { gamma: f64 },
}

/// A symmetric positive-semidefinite kernel over n samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
}

impl KernelMatrix {
    /// Validates shape, symmetry (within 1e-10 at the matrix scale), and
    /// near-positive-semidefiniteness (smallest eigenvalue no more negative
    /// than 1e-8 at the trace scale), then stores the symmetrized values.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::dimension(format!(
                "a kernel must be square and nonempty, got {}x{}",
                n,
                values.ncols()
            )));
        }
        let scale = 1.0 + values.amax();
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((values[(i, j)] - values[(j, i)]).abs());
            }
        }
        if asym > 1e-10 * scale {
            return Err(Error::degenerate(format!(
                "kernel is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let symmetric = sym(&values)?;
        let trace = symmetric.trace();
        let (vals, _) = sym_eigen(&symmetric);
        let min_eig = vals[0];
        if min_eig < -1e-8 * (1.0 + trace.abs()) {
            return Err(Error::degenerate(format!(
                "kernel is not positive semidefinite (smallest eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(KernelMatrix { values: symmetric })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Feature-space squared distance K_ii + K_jj - 2 K_ij, written with
    /// exactly the operations the regression side uses for pair-difference
    /// predictions, so the two agree bitwise.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.values[(i, i)] + self.values[(j, j)] - 2.0 * self.values[(i, j)]
    }
}

/// Builds the base kernel from feature rows; `center` applies the double
/// centering K - (1/n) 1 1' K - (1/n) K 1 1' + (1/n^2) 1 1' K 1 1', i.e.
/// centering the data in kernel feature space.
pub fn build_kernel(
    features: &DMatrix<f64>,
    kind: KernelKind,
    center: bool,
) -> Result<KernelMatrix> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::data("cannot build a kernel over zero samples".to_string()));
    }
    let gram = features * features.transpose();
    let mut k = match kind {
        KernelKind::Linear => gram,
        KernelKind::Rbf { gamma } => {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::config(format!(
                    "rbf kernel needs gamma > 0, got {gamma}"
                )));
            }
            DMatrix::from_fn(n, n, |i, j| {
                let d2 = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
                (-gamma * d2).exp()
            })
        }
    };
    if center {
        let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
        let grand = row_means.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] += grand - row_means[i] - row_means[j];
            }
        }
    }
    KernelMatrix::new(k)
}

/// Draws `count` uniform ordered pairs (i != j) and turns each into a
/// distance constraint on the learned kernel: same-class pairs bound the
/// distance above by y(1 - alpha), cross-class pairs below by y(1 + alpha),
/// where y is the base kernel distance. Records the realized class balance;
/// a single-class labeling yields only upper bounds and a warning.
pub fn generate_kernel_constraints(
    kernel: &KernelMatrix,
    labels: &[usize],
    alpha: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Result<ConstraintSet> {
    let n = kernel.n();
    if labels.len() != n {
        return Err(Error::dimension(format!(
            "{} labels for a kernel over {} samples",
            labels.len(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::data("constraint generation needs at least 2 samples".to_string()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!(
            "the margin alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if count == 0 {
        return Err(Error::config("at least one constraint is required".to_string()));
    }

    let mut records = Vec::with_capacity(count);
    let mut balance = ClassBalance::default();
    for _ in 0..count {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        // Tiny negative distances can arise from the PSD tolerance; targets
        // must be nonnegative.
        let y = kernel.distance(i, j).max(0.0);
        let (target, relation) = if labels[i] == labels[j] {
            balance.same_class += 1;
            (y * (1.0 - alpha), Relation::UpperBound)
        } else {
            balance.cross_class += 1;
            (y * (1.0 + alpha), Relation::LowerBound)
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 3.0, 1.0])
    }

    #[test]
    fn linear_kernel_matches_the_gram_oracle() {
        let x = features();
        let k = build_kernel(&x, KernelKind::Linear, false).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut oracle = 0.0;
                for t in 0..2 {
                    oracle += x[(i, t)] * x[(j, t)];
                }
                assert!((k.values()[(i, j)] - oracle).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rbf_diagonal_is_one_and_identical_rows_saturate() {
        let mut x = features();
        x.set_row(2, &x.row(1).into_owned());
        let k = build_kernel(&x, KernelKind::Rbf { gamma: 0.5 }, false).unwrap();
        for i in 0..4 {
            assert_eq!(k.values()[(i, i)], 1.0);
        }
        assert!((k.values()[(1, 2)] - 1.0).abs() <= 1e-15);
        assert!(k.values()[(0, 3)] < 1.0);
        assert!(build_kernel(&x, KernelKind::Rbf { gamma: 0.0 }, false).is_err());
        assert!(build_kernel(&DMatrix::zeros(0, 2), KernelKind::Linear, false).is_err());
    }

    #[test]
    fn centering_kills_row_sums() {
        for kind in [KernelKind::Linear, KernelKind::Rbf { gamma: 0.2 }] {
            let k = build_kernel(&features(), kind, true).unwrap();
            for i in 0..k.n() {
                let s: f64 = k.values().row(i).sum();
                assert!(s.abs() <= 1e-10, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_kernels() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(KernelMatrix::new(asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(KernelMatrix::new(indefinite).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(KernelMatrix::new(ok).is_ok());
    }

    #[test]
    fn alpha_scales_targets_around_the_raw_distance() {
        let k = build_kernel(&features(), KernelKind::Linear, false).unwrap();
        let labels = vec![0, 0, 1, 1];

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plain = generate_kernel_constraints(&k, &labels, 0.0, 40, &mut rng).unwrap();
        for rec in &plain.records {
            assert_eq!(rec.target.to_bits(), k.distance(rec.i, rec.j).max(0.0).to_bits());
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let margin = generate_kernel_constraints(&k, &labels, 0.25, 40, &mut rng).unwrap();
        for rec in &margin.records {
            let y = k.distance(rec.i, rec.j).max(0.0);
            match rec.relation {
                Relation::UpperBound => assert!((rec.target - 0.75 * y).abs() <= 1e-15),
                Relation::LowerBound => assert!((rec.target - 1.25 * y).abs() <= 1e-15),
                Relation::Equality => unreachable!("generator emits bounds only"),
            }
        }
        let balance = margin.balance.unwrap();
        assert_eq!(balance.same_class + balance.cross_class, 40);
        assert!(margin.warnings.is_empty());

        assert!(generate_kernel_constraints(&k, &labels, 1.5, 4, &mut rng).is_err());
        assert!(generate_kernel_constraints(&k, &labels[..3], 0.0, 4, &mut rng).is_err());
    }

    #[test]
    fn fixed_seed_reproduces_constraints_and_single_class_warns() {
        let k = build_kernel(&features(), KernelKind::Rbf { gamma: 0.3 }, false).unwrap();
        let labels = vec![0, 0, 1, 1];
        let mut a_rng = ChaCha8Rng::seed_from_u64(9);
        let mut b_rng = ChaCha8Rng::seed_from_u64(9);
        let a = generate_kernel_constraints(&k, &labels, 0.25, 25, &mut a_rng).unwrap();
        let b = generate_kernel_constraints(&k, &labels, 0.25, 25, &mut b_rng).unwrap();
        assert_eq!(a.records, b.records);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let single = generate_kernel_constraints(&k, &[3, 3, 3, 3], 0.1, 10, &mut rng).unwrap();
        assert_eq!(single.balance.unwrap().cross_class, 0);
        assert_eq!(single.warnings.len(), 1);
        assert!(single
            .records
            .iter()
            .all(|r| r.relation == Relation::UpperBound));
    }
}
