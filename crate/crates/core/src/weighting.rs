//! Per-batch Lipschitz constants and the sampling distributions they induce.
//!
//! For the least-squares objective, batch `τᵢ` has gradient Lipschitz
//! constant `L_τᵢ = (n/b)·‖A_τᵢ‖²`; the smooth sampler mixes the plain
//! average with proportionality,
//!
//! ```text
//! p(τᵢ) = 1/(2d) + L_τᵢ / (2·d·L̄_τ),
//! ```
//!
//! which keeps every probability at least `1/(2d)` while still favoring
//! heavy batches. For the hinge objective, batch `τᵢ`'s subgradients are
//! bounded by `G_τᵢ = ‖A_τᵢ‖/√b + λ` and the non-smooth sampler is purely
//! proportional, `p(τᵢ) = G_τᵢ / Σⱼ G_τⱼ`.
//!
//! Three interchangeable backends estimate `‖A_τᵢ‖²`: a converged power
//! iteration (exact), the largest squared row norm of the batch (cheap
//! upper-bound proxy), and a fixed-budget power method with a tunable
//! accuracy/probability trade-off.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::batching::Partition;
use crate::math;
use crate::matrix::{DenseMatrix, Estimator};
use crate::{Error, Result};

// ── Lipschitz tables ────────────────────────────────────────────────────────

/// Per-batch Lipschitz constants under one estimation backend.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzTable {
    values: Vec<f64>,
    estimator: Estimator,
    mean: f64,
    precompute_flops: u64,
}

impl LipschitzTable {
    /// Adopts externally computed per-batch constants (no precompute cost).
    pub fn from_values(values: Vec<f64>, estimator: Estimator) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "a Lipschitz table needs at least one batch".to_string(),
            ));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "Lipschitz value at batch {i} is not a finite nonnegative number"
                )));
            }
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(LipschitzTable {
            values,
            estimator,
            mean,
            precompute_flops: 0,
        })
    }

    /// Per-batch constants, indexed like the partition's batches.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Backend that produced the values.
    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    /// Arithmetic mean of the values (`L̄_τ` or `Ḡ_τ`).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Multiply-adds spent estimating the batch norms.
    pub fn precompute_flops(&self) -> u64 {
        self.precompute_flops
    }

    /// Number of batches.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; tables are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Gradient Lipschitz constants `L_τᵢ = (n/b)·‖A_τᵢ‖²(est)` for the
/// least-squares objective, one per batch of `p`.
pub fn lipschitz_ls(
    a: &DenseMatrix,
    p: &Partition,
    estimator: Estimator,
) -> Result<LipschitzTable> {
    let scale = (p.n() / p.batch_size()) as f64;
    let (norms, flops) = batch_norms(a, p, estimator)?;
    let values: Vec<f64> = norms.iter().map(|&v| scale * v).collect();
    let mut table = LipschitzTable::from_values(values, estimator)?;
    table.precompute_flops = flops;
    Ok(table)
}

/// Subgradient bounds `G_τᵢ = ‖A_τᵢ‖/√b + λ` for the regularized hinge
/// objective; `a_signed` holds the label-scaled rows `y_k·a_k` (the sign
/// flip leaves each batch's spectral norm unchanged, so an unsigned matrix
/// gives the same table).
pub fn lipschitz_hinge(
    a_signed: &DenseMatrix,
    p: &Partition,
    lambda: f64,
    estimator: Estimator,
) -> Result<LipschitzTable> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(
            "regularization weight must be finite and nonnegative".to_string(),
        ));
    }
    let root_b = math::sqrt(p.batch_size() as f64);
    let (norms, flops) = batch_norms(a_signed, p, estimator)?;
    let values: Vec<f64> = norms
        .iter()
        .map(|&v| math::sqrt(v) / root_b + lambda)
        .collect();
    let mut table = LipschitzTable::from_values(values, estimator)?;
    table.precompute_flops = flops;
    Ok(table)
}

fn batch_norms(a: &DenseMatrix, p: &Partition, estimator: Estimator) -> Result<(Vec<f64>, u64)> {
    if p.n() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} rows but the matrix has {}",
            p.n(),
            a.nrows()
        )));
    }
    let mut norms = Vec::with_capacity(p.len());
    let mut flops = 0u64;
    for i in 0..p.len() {
        let view = p.view(a, i)?;
        let (value, cost) = estimator.batch_norm_sq(&view, p.batch_size(), i as u64)?;
        norms.push(value);
        flops += cost;
    }
    Ok((norms, flops))
}

// ── Weight tables ───────────────────────────────────────────────────────────

/// Which formula produced a weight table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Every batch with probability `1/d`.
    Uniform,
    /// Half-uniform, half-proportional mixture for the smooth solver.
    SmoothWeighted,
    /// Purely proportional weights for the non-smooth solver.
    NonSmoothWeighted,
}

/// A sampling distribution over batches with its prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    mode: WeightMode,
    fallback: bool,
}

impl WeightTable {
    fn from_raw(raw: Vec<f64>, mode: WeightMode, fallback: bool) -> Self {
        let total: f64 = raw.iter().sum();
        let probabilities: Vec<f64> = raw.iter().map(|&w| w / total).collect();
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for &p in &probabilities {
            acc += p;
            cumulative.push(acc);
        }
        // Pin the final prefix sum so every draw in [0, 1) lands inside
        // the table regardless of rounding in the running sum.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        WeightTable {
            probabilities,
            cumulative,
            mode,
            fallback,
        }
    }

    /// Per-batch probabilities (renormalized to unit sum).
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Prefix sums of the probabilities; the last entry is exactly 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Formula behind the table.
    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    /// True when degenerate (all-zero) Lipschitz values forced a uniform
    /// fallback; surfaces should warn the user when set.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    /// Number of batches.
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    /// Always false; tables are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Uniform distribution over `d` batches.
pub fn weights_uniform(d: usize) -> Result<WeightTable> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "a weight table needs at least one batch".to_string(),
        ));
    }
    Ok(WeightTable::from_raw(
        alloc::vec![1.0 / d as f64; d],
        WeightMode::Uniform,
        false,
    ))
}

/// Smooth-solver weights `p(τᵢ) = 1/(2d) + L_τᵢ/(2·d·L̄_τ)`.
///
/// The mixture keeps every probability at least `1/(2d)` (up to the final
/// renormalization's rounding), so importance rescaling by `1/(d·p)` never
/// blows up a batch's step. All-zero tables degrade to uniform with the
/// fallback flag set.
pub fn weights_smooth(l: &LipschitzTable) -> WeightTable {
    let d = l.len() as f64;
    let total: f64 = l.values().iter().sum();
    if total <= 0.0 {
        return WeightTable::from_raw(
            alloc::vec![1.0 / d; l.len()],
            WeightMode::SmoothWeighted,
            true,
        );
    }
    let raw: Vec<f64> = l
        .values()
        .iter()
        .map(|&v| 0.5 / d + 0.5 * v / total)
        .collect();
    WeightTable::from_raw(raw, WeightMode::SmoothWeighted, false)
}

/// Non-smooth-solver weights `p(τᵢ) = G_τᵢ / Σⱼ G_τⱼ`.
pub fn weights_nonsmooth(g: &LipschitzTable) -> WeightTable {
    let d = g.len() as f64;
    let total: f64 = g.values().iter().sum();
    if total <= 0.0 {
        return WeightTable::from_raw(
            alloc::vec![1.0 / d; g.len()],
            WeightMode::NonSmoothWeighted,
            true,
        );
    }
    WeightTable::from_raw(g.values().to_vec(), WeightMode::NonSmoothWeighted, false)
}

/// Draws one batch index with the table's probabilities.
///
/// Consumes exactly one `f64` from the stream and binary-searches the
/// prefix sums, so a run's draw sequence is a pure function of its seed.
pub fn sample(w: &WeightTable, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let idx = w.cumulative.partition_point(|&c| c <= u);
    idx.min(w.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batching::{partition_random, partition_sequential};
    use crate::rng;

    fn eye(n: usize) -> DenseMatrix {
        let mut rows = Vec::new();
        for i in 0..n {
            let mut r = alloc::vec![0.0; n];
            r[i] = 1.0;
            rows.push(r);
        }
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn orthonormal_rows_give_constant_ls_table() {
        let a = eye(4);
        let p = partition_random(4, 2, 5).unwrap();
        let t = lipschitz_ls(&a, &p, Estimator::Exact).unwrap();
        for &v in t.values() {
            assert!((v - 2.0).abs() <= 1e-12);
        }
        assert!((t.mean() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn singleton_batches_make_all_backends_coincide() {
        let a = DenseMatrix::from_rows(&[alloc::vec![3.0, 4.0], alloc::vec![1.0, 2.0]]).unwrap();
        let p = partition_sequential(&[25.0, 5.0], 1).unwrap();
        let exact = lipschitz_ls(&a, &p, Estimator::Exact).unwrap();
        let proxy = lipschitz_ls(&a, &p, Estimator::MaxNorm).unwrap();
        let power = lipschitz_ls(
            &a,
            &p,
            Estimator::Power {
                epsilon: 0.01,
                seed: 9,
            },
        )
        .unwrap();
        for i in 0..2 {
            assert!((exact.values()[i] - proxy.values()[i]).abs() <= 1e-10);
            assert!((exact.values()[i] - power.values()[i]).abs() <= 1e-10);
        }
        // n‖a₀‖² = 2·25 on the first (larger) batch.
        assert!((exact.values()[0] - 50.0).abs() <= 1e-10);
    }

    #[test]
    fn hinge_table_on_orthonormal_batch_matches_hand_value() {
        let a = eye(4);
        let p = partition_random(4, 4, 1).unwrap();
        let t = lipschitz_hinge(&a, &p, 0.1, Estimator::Exact).unwrap();
        assert!((t.values()[0] - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn hinge_singleton_value_is_row_norm_plus_lambda() {
        let a = DenseMatrix::from_rows(&[alloc::vec![3.0, 4.0]]).unwrap();
        let p = partition_sequential(&[25.0], 1).unwrap();
        let t = lipschitz_hinge(&a, &p, 0.25, Estimator::Exact).unwrap();
        assert!((t.values()[0] - 5.25).abs() <= 1e-12);
    }

    #[test]
    fn smooth_weights_match_two_batch_hand_computation() {
        let t = LipschitzTable::from_values(alloc::vec![1.0, 3.0], Estimator::Exact).unwrap();
        let w = weights_smooth(&t);
        assert!((w.probabilities()[0] - 0.375).abs() <= 1e-15);
        assert!((w.probabilities()[1] - 0.625).abs() <= 1e-15);
        assert_eq!(w.mode(), WeightMode::SmoothWeighted);
        assert!(!w.is_fallback());
    }

    #[test]
    fn equal_lipschitz_values_give_uniform_smooth_weights() {
        let t = LipschitzTable::from_values(alloc::vec![2.0; 5], Estimator::Exact).unwrap();
        let w = weights_smooth(&t);
        for &p in w.probabilities() {
            assert!((p - 0.2).abs() <= 1e-15);
        }
    }

    #[test]
    fn smooth_weights_never_drop_below_half_uniform() {
        let t = LipschitzTable::from_values(
            alloc::vec![0.0, 1e-12, 5.0, 1e6, 3.0, 0.25],
            Estimator::MaxNorm,
        )
        .unwrap();
        let w = weights_smooth(&t);
        let floor = 1.0 / (2.0 * 6.0);
        let sum: f64 = w.probabilities().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        for &p in w.probabilities() {
            assert!(p >= floor - 1e-12);
        }
    }

    #[test]
    fn nonsmooth_weights_are_proportional() {
        let t = LipschitzTable::from_values(alloc::vec![1.0, 1.0, 2.0], Estimator::Exact).unwrap();
        let w = weights_nonsmooth(&t);
        assert!((w.probabilities()[0] - 0.25).abs() <= 1e-15);
        assert!((w.probabilities()[1] - 0.25).abs() <= 1e-15);
        assert!((w.probabilities()[2] - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn zero_mass_tables_fall_back_to_uniform_with_flag() {
        let t = LipschitzTable::from_values(alloc::vec![0.0, 0.0], Estimator::Exact).unwrap();
        for w in [weights_smooth(&t), weights_nonsmooth(&t)] {
            assert!(w.is_fallback());
            assert!((w.probabilities()[0] - 0.5).abs() <= 1e-15);
            assert!((w.probabilities()[1] - 0.5).abs() <= 1e-15);
        }
    }

    #[test]
    fn degenerate_weight_always_samples_the_unit_mass() {
        let t = LipschitzTable::from_values(alloc::vec![0.0, 7.0], Estimator::Exact).unwrap();
        let w = weights_nonsmooth(&t);
        let mut stream = rng::stream(123, rng::domain::TRIAL, 0);
        for _ in 0..1000 {
            assert_eq!(sample(&w, &mut stream), 1);
        }
    }

    #[test]
    fn sampling_frequencies_track_probabilities() {
        let t = LipschitzTable::from_values(alloc::vec![1.0, 3.0], Estimator::Exact).unwrap();
        let w = weights_smooth(&t); // p = [0.375, 0.625]
        let mut stream = rng::stream(7, rng::domain::TRIAL, 1);
        let draws = 20_000;
        let mut hits = [0u32; 2];
        for _ in 0..draws {
            hits[sample(&w, &mut stream)] += 1;
        }
        let f0 = hits[0] as f64 / draws as f64;
        // 5σ band for a Bernoulli(0.375) mean over 20k draws ≈ 0.017.
        assert!((f0 - 0.375).abs() <= 0.02, "frequency {f0}");
    }

    #[test]
    fn cumulative_ends_exactly_at_one() {
        let t = LipschitzTable::from_values(alloc::vec![0.3, 0.4, 0.9, 1e-3], Estimator::Exact)
            .unwrap();
        let w = weights_nonsmooth(&t);
        assert_eq!(*w.cumulative().last().unwrap(), 1.0);
    }
}
