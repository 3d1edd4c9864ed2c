//! Fixed partitions of row indices into equal-size batches.
//!
//! Both solvers draw from a partition `{τ₁, …, τ_d}` of the `n` row
//! indices into `d = n/b` batches of exactly `b` rows, fixed before the
//! run and never resampled. Two constructions are provided:
//!
//! * **random** — a uniformly random permutation chopped into consecutive
//!   blocks, the neutral default;
//! * **sequential** — indices sorted by decreasing squared row norm and
//!   then chopped, which groups rows of comparable weight and tends to
//!   lower the partition cost `Σᵢ ‖A_τᵢ‖²` that drives both the step size
//!   and the iteration-count predictions.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::matrix::{DenseMatrix, Estimator, RowView};
use crate::{rng, Error, Result};

/// How a partition was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Random permutation chopped into blocks, seeded for replay.
    Random {
        /// Seed of the permutation stream.
        seed: u64,
    },
    /// Decreasing-row-norm order chopped into blocks.
    Sequential,
}

/// A disjoint cover of `[0, n)` by `d` batches of exactly `b` indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    batches: Vec<Vec<usize>>,
    n: usize,
    b: usize,
    strategy: Strategy,
}

impl Partition {
    /// Validates and adopts externally built batches.
    ///
    /// Every batch must hold exactly `b` indices; together they must cover
    /// `[0, n)` without repetition.
    pub fn from_batches(batches: Vec<Vec<usize>>, b: usize, strategy: Strategy) -> Result<Self> {
        if b == 0 || batches.is_empty() {
            return Err(Error::InvalidArgument(
                "partition needs a positive batch size and at least one batch".to_string(),
            ));
        }
        let n = batches.len() * b;
        let mut seen = alloc::vec![false; n];
        for batch in &batches {
            if batch.len() != b {
                return Err(Error::InvalidArgument(format!(
                    "every batch must have exactly {b} indices, found one with {}",
                    batch.len()
                )));
            }
            for &i in batch {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "batch index {i} outside [0, {n})"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "row {i} appears in more than one batch"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(Partition {
            batches,
            n,
            b,
            strategy,
        })
    }

    /// Number of rows covered.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rows per batch.
    pub fn batch_size(&self) -> usize {
        self.b
    }

    /// Number of batches `d = n/b`.
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    /// True only for the impossible empty partition; kept for idiom.
    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// Construction strategy.
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Indices of batch `i`.
    pub fn batch(&self, i: usize) -> &[usize] {
        &self.batches[i]
    }

    /// All batches in order.
    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    /// Row view of `a` restricted to batch `i`.
    pub fn view<'a>(&'a self, a: &'a DenseMatrix, i: usize) -> Result<RowView<'a>> {
        RowView::new(a, &self.batches[i])
    }
}

fn require_divisible(n: usize, b: usize) -> Result<usize> {
    if n == 0 || b == 0 {
        return Err(Error::InvalidArgument(
            "partition needs n ≥ 1 and b ≥ 1".to_string(),
        ));
    }
    if !n.is_multiple_of(b) {
        return Err(Error::InvalidArgument(format!(
            "batch size {b} does not divide row count {n}; pad or truncate the system so that b divides n"
        )));
    }
    Ok(n / b)
}

/// Uniformly random partition: a seeded permutation of `[0, n)` chopped
/// into `d` consecutive blocks of `b`.
pub fn partition_random(n: usize, b: usize, seed: u64) -> Result<Partition> {
    let d = require_divisible(n, b)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = rng::stream(seed, rng::domain::PARTITION, 0);
    order.shuffle(&mut stream);
    let batches = (0..d).map(|i| order[i * b..(i + 1) * b].to_vec()).collect();
    Partition::from_batches(batches, b, Strategy::Random { seed })
}

/// Norm-ordered partition: indices sorted by decreasing `row_norms_sq`
/// entry (ties broken by ascending index) and chopped into blocks of `b`.
pub fn partition_sequential(row_norms_sq: &[f64], b: usize) -> Result<Partition> {
    let n = row_norms_sq.len();
    let d = require_divisible(n, b)?;
    for (i, &v) in row_norms_sq.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "row norm² at index {i} is not a finite nonnegative number"
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        row_norms_sq[j]
            .partial_cmp(&row_norms_sq[i])
            .expect("norms checked finite")
            .then(i.cmp(&j))
    });
    let batches = (0..d).map(|i| order[i * b..(i + 1) * b].to_vec()).collect();
    Partition::from_batches(batches, b, Strategy::Sequential)
}

/// Partition cost `Σᵢ ‖A_τᵢ‖²` under the chosen batch-norm estimator.
///
/// This is the quantity sequential batching tries to shrink; for any
/// partition it sits between `max(‖A‖², ‖A‖_F²/b)` and `‖A‖_F²`.
pub fn partition_cost(a: &DenseMatrix, p: &Partition, estimator: Estimator) -> Result<f64> {
    if p.n() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} rows but the matrix has {}",
            p.n(),
            a.nrows()
        )));
    }
    let mut cost = 0.0;
    for i in 0..p.len() {
        let view = p.view(a, i)?;
        let (value, _) = estimator.batch_norm_sq(&view, p.batch_size(), i as u64)?;
        cost += value;
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::row_norms_sq;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn single_batch_holds_all_indices_for_any_seed() {
        for seed in [0u64, 1, 99] {
            let p = partition_random(4, 4, seed).unwrap();
            assert_eq!(p.len(), 1);
            assert_eq!(sorted(p.batch(0).to_vec()), alloc::vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn random_partition_replays_exactly_under_same_seed() {
        let p1 = partition_random(6, 2, 42).unwrap();
        let p2 = partition_random(6, 2, 42).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.len(), 3);
    }

    #[test]
    fn singleton_batches_form_a_permutation() {
        let p = partition_random(5, 1, 7).unwrap();
        let mut all: Vec<usize> = p.batches().iter().map(|b| b[0]).collect();
        all.sort_unstable();
        assert_eq!(all, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_orders_by_decreasing_norm() {
        let p = partition_sequential(&[5.0, 1.0, 4.0, 2.0], 2).unwrap();
        assert_eq!(p.batch(0), &[0, 2]);
        assert_eq!(p.batch(1), &[3, 1]);
    }

    #[test]
    fn sequential_breaks_ties_by_ascending_index() {
        let p = partition_sequential(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(p.batch(0), &[0, 1]);
        assert_eq!(p.batch(1), &[2, 3]);
    }

    #[test]
    fn full_width_batch_contains_everything() {
        let p = partition_sequential(&[3.0, 9.0, 1.0], 3).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(sorted(p.batch(0).to_vec()), alloc::vec![0, 1, 2]);
    }

    #[test]
    fn indivisible_batch_size_is_rejected_with_guidance() {
        let err = partition_random(10, 3, 0).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("pad or truncate"), "got: {msg}");
    }

    #[test]
    fn from_batches_rejects_duplicates_and_gaps() {
        assert!(Partition::from_batches(
            alloc::vec![alloc::vec![0, 1], alloc::vec![1, 2]],
            2,
            Strategy::Sequential
        )
        .is_err());
        assert!(
            Partition::from_batches(alloc::vec![alloc::vec![0, 5]], 2, Strategy::Sequential)
                .is_err()
        );
    }

    #[test]
    fn cost_of_singleton_batches_is_frobenius_norm() {
        let a = DenseMatrix::from_rows(&[alloc::vec![3.0, 4.0], alloc::vec![1.0, 2.0]]).unwrap();
        let p = partition_random(2, 1, 11).unwrap();
        let cost = partition_cost(&a, &p, Estimator::Exact).unwrap();
        assert!((cost - a.frobenius_norm_sq()).abs() <= 1e-10 * a.frobenius_norm_sq());
    }

    #[test]
    fn cost_of_orthonormal_rows_counts_batches() {
        let a = DenseMatrix::from_rows(&[
            alloc::vec![1.0, 0.0, 0.0, 0.0],
            alloc::vec![0.0, 1.0, 0.0, 0.0],
            alloc::vec![0.0, 0.0, 1.0, 0.0],
            alloc::vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p = partition_random(4, 2, 3).unwrap();
        let cost = partition_cost(&a, &p, Estimator::Exact).unwrap();
        assert!((cost - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn row_norm_helper_feeds_sequential_partition() {
        let a = DenseMatrix::from_rows(&[
            alloc::vec![0.0, 1.0],
            alloc::vec![3.0, 0.0],
            alloc::vec![1.0, 1.0],
            alloc::vec![2.0, 2.0],
        ])
        .unwrap();
        let p = partition_sequential(&row_norms_sq(&a), 2).unwrap();
        // norms² = [1, 9, 2, 8] → order 1, 3, 2, 0.
        assert_eq!(p.batch(0), &[1, 3]);
        assert_eq!(p.batch(1), &[2, 0]);
    }
}
