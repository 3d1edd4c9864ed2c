//! Batched weighted subgradient descent with tail averaging for the
//! regularized hinge loss.
//!
//! The objective `F(x) = (1/n)Σᵢ[1 − yᵢ⟨x, aᵢ⟩]₊ + (λ/2)‖x‖²` is
//! λ-strongly convex but non-smooth; each iteration `k` samples a batch
//! `τ` from the weight table and applies the decreasing-step update
//!
//! ```text
//! x ← x − (1/(λk)) · (1/(d·p(τ))) · (λx − (1/b)Σ_{j∈τ} χ_j(x)·y_j·a_j),
//! ```
//!
//! where `χ_j(x) = 1` exactly when the margin `y_j⟨x, a_j⟩` falls
//! strictly below 1. Individual iterates do not converge; the reported
//! solution is the *tail average* — the mean of the last `⌈αk⌉`
//! iterates — whose objective gap decays like `(1 + ln k)/(λk)` up to
//! the batch subgradient bounds.
//!
//! The tail average is maintained without storing iterates by a
//! two-accumulator scheme: a running sum of all iterates plus a lagged
//! replica of the trajectory (same RNG stream, replayed forward) whose
//! own running sum is subtracted. Because the replica repeats the exact
//! floating-point operations of the main pass, the difference equals the
//! stored-suffix mean to machine precision.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::batching::Partition;
use crate::config::{SamplingMode, SolveConfig};
use crate::math;
use crate::problems::HingeLossProblem;
use crate::trace::{FlopModel, TraceRecord};
use crate::weighting::{weights_nonsmooth, weights_uniform, LipschitzTable, WeightTable};
use crate::{rng, Error, Result};

// ── Plan ────────────────────────────────────────────────────────────────────

/// Budget prediction for one hinge-loss run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonSmoothPlan {
    /// Tail fraction: the reported average covers the last `⌈αk⌉` iterates.
    pub alpha: f64,
    /// Averaging overhead `m_α = 1 + ln(1/min(α, 1−α))`.
    pub m_alpha: f64,
    /// Leading absolute constant used for planning (advisory only).
    pub c_abs: f64,
    /// Predicted iterations to reach an expected objective gap of
    /// `epsilon`; a budget hint, not a guarantee, since the true leading
    /// constant is unspecified.
    pub predicted_iterations: usize,
    /// Target objective gap.
    pub epsilon: f64,
    /// Strong convexity of the objective; equals the regularization
    /// weight λ.
    pub mu: f64,
}

/// Plans a hinge-loss run: `predicted = ⌈C·m_α·Ḡ_τ²/(λ·ε)⌉` with `Ḡ_τ`
/// the mean of the table's per-batch subgradient bounds.
pub fn plan_nonsmooth(
    g: &LipschitzTable,
    lambda: f64,
    epsilon: f64,
    alpha: f64,
    c_abs: f64,
) -> Result<NonSmoothPlan> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(
            "regularization weight must be a positive finite number".to_string(),
        ));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(
            "target objective gap must be a positive finite number".to_string(),
        ));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    if !c_abs.is_finite() || c_abs <= 0.0 {
        return Err(Error::InvalidArgument(
            "planning constant must be a positive finite number".to_string(),
        ));
    }
    let m_alpha = 1.0 + math::ln(1.0 / alpha.min(1.0 - alpha));
    let mean = g.mean();
    let predicted = c_abs * m_alpha * mean * mean / (lambda * epsilon);
    let predicted_iterations = if predicted >= 1.0 {
        math::ceil(predicted) as usize
    } else {
        1
    };
    Ok(NonSmoothPlan {
        alpha,
        m_alpha,
        c_abs,
        predicted_iterations,
        epsilon,
        mu: lambda,
    })
}

// ── Subgradient ─────────────────────────────────────────────────────────────

/// Subgradient of the batch functional `g_τ(x) = λ/2‖x‖² +
/// (1/b)Σ_{j∈τ}[1 − y_j⟨x, a_j⟩]₊` at `x`:
/// `λx − (1/b)Σ_{j∈τ} χ_j(x)·y_j·a_j` with `χ_j = 1` iff the margin is
/// strictly below 1 (an exact-boundary margin contributes nothing).
///
/// Row contributions are independent; their reduction runs in ascending
/// row-index order so results do not depend on worker count.
pub fn hinge_subgradient_batch(p: &HingeLossProblem, tau: &[usize], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.m() {
        return Err(Error::ShapeMismatch(format!(
            "point has {} coordinates but the rows have {}",
            x.len(),
            p.m()
        )));
    }
    if tau.is_empty() {
        return Err(Error::InvalidArgument("batch must be nonempty".to_string()));
    }
    let mut indices = tau.to_vec();
    indices.sort_unstable();
    let m = p.m();
    let mut s = alloc::vec![0.0; m];
    for &j in &indices {
        if j >= p.n() {
            return Err(Error::InvalidArgument(format!(
                "row index {j} out of range for {} rows",
                p.n()
            )));
        }
        let row = p.a().row(j);
        let y = p.labels()[j];
        if y * math::dot(row, x) < 1.0 {
            for t in 0..m {
                s[t] += y * row[t];
            }
        }
    }
    let inv_b = 1.0 / indices.len() as f64;
    let lambda = p.lambda();
    Ok((0..m).map(|t| lambda * x[t] - inv_b * s[t]).collect())
}

// ── State ───────────────────────────────────────────────────────────────────

/// Iterate plus tail-averaging accumulators for one hinge-loss run.
///
/// `sum` accumulates every iterate of the main trajectory; the lagged
/// replica (`lag_x`, `lag_rng`) replays the identical trajectory
/// `k − ⌈αk⌉` iterations behind and accumulates into `lag_sum`, so the
/// current tail average is `(sum − lag_sum)/(k − lag_iteration)`.
#[derive(Debug, Clone)]
pub struct AveragedState {
    /// Current iterate `x_k`.
    pub x: Vec<f64>,
    /// Completed iterations `k`.
    pub iteration: usize,
    /// `Σ_{j≤k} x_j`.
    pub sum: Vec<f64>,
    /// Replica iterate, trailing the main trajectory.
    pub lag_x: Vec<f64>,
    /// `Σ_{j≤lag_iteration} x_j`.
    pub lag_sum: Vec<f64>,
    /// Iterations completed by the replica; equals `k − ⌈αk⌉`.
    pub lag_iteration: usize,
    /// Tail fraction α.
    pub alpha: f64,
    /// Batch-sampling stream of the main trajectory.
    pub rng: ChaCha8Rng,
    /// Replica's copy of the stream, cloned before any draws.
    pub lag_rng: ChaCha8Rng,
    /// Checkpoints recorded so far.
    pub trace: Vec<TraceRecord>,
    /// Cost counters (main trajectory only; the replica is bookkeeping).
    pub flops: FlopModel,
}

impl AveragedState {
    /// Zero start in dimension `m` for batches of `batch_size` rows.
    pub fn new(m: usize, batch_size: usize, alpha: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "tail fraction must lie strictly between 0 and 1, got {alpha}"
            )));
        }
        let lag_rng = rng.clone();
        Ok(AveragedState {
            x: alloc::vec![0.0; m],
            iteration: 0,
            sum: alloc::vec![0.0; m],
            lag_x: alloc::vec![0.0; m],
            lag_sum: alloc::vec![0.0; m],
            lag_iteration: 0,
            alpha,
            rng,
            lag_rng,
            trace: Vec::new(),
            flops: FlopModel::new(batch_size),
        })
    }

    /// Mean of the last `⌈α·iteration⌉` iterates; the start point itself
    /// before any step.
    pub fn averaged(&self) -> Vec<f64> {
        if self.iteration == 0 {
            return self.x.clone();
        }
        let len = (self.iteration - self.lag_iteration) as f64;
        self.sum
            .iter()
            .zip(&self.lag_sum)
            .map(|(&s, &l)| (s - l) / len)
            .collect()
    }
}

fn suffix_len(k: usize, alpha: f64) -> usize {
    (math::ceil(alpha * k as f64) as usize).clamp(1, k)
}

/// Applies the iteration-`k` update in place. Returns `Err(())` when a
/// margin evaluates non-finite (iterate blew up on a previous step).
fn apply_update(
    x: &mut [f64],
    p: &HingeLossProblem,
    partition: &Partition,
    w: &WeightTable,
    rng: &mut ChaCha8Rng,
    k: usize,
) -> core::result::Result<(), ()> {
    let i = crate::weighting::sample(w, rng);
    let mut indices = partition.batch(i).to_vec();
    indices.sort_unstable();

    let m = x.len();
    let mut s = alloc::vec![0.0; m];
    for &j in &indices {
        let row = p.a().row(j);
        let y = p.labels()[j];
        let margin = y * math::dot(row, x);
        if !margin.is_finite() {
            return Err(());
        }
        if margin < 1.0 {
            for t in 0..m {
                s[t] += y * row[t];
            }
        }
    }
    // Fused form of x − (1/(λk·d·p))·(λx − s/b): the regularizer's pull
    // becomes the exact decay factor 1 − 1/(k·d·p).
    let kdp = k as f64 * partition.len() as f64 * w.probabilities()[i];
    let c1 = 1.0 - 1.0 / kdp;
    let c2 = 1.0 / (p.lambda() * kdp) / indices.len() as f64;
    for t in 0..m {
        x[t] = c1 * x[t] + c2 * s[t];
    }
    Ok(())
}

/// One iteration of batched weighted subgradient descent at step index
/// `k`, updating the iterate, the running sums, and the lagged replica.
///
/// `k` must equal `state.iteration + 1`: the replica replays the main
/// trajectory's own floating-point history, which only stays exact when
/// iterations are applied in order.
pub fn step_nonsmooth(
    state: &mut AveragedState,
    p: &HingeLossProblem,
    partition: &Partition,
    w: &WeightTable,
    k: usize,
) -> Result<()> {
    if k != state.iteration + 1 {
        return Err(Error::InvalidArgument(format!(
            "iterations must be applied in order: expected step {}, got {k}",
            state.iteration + 1
        )));
    }
    if partition.n() != p.n() || w.len() != partition.len() {
        return Err(Error::ShapeMismatch(
            "partition and weight table must match the system".to_string(),
        ));
    }
    if state.x.len() != p.m() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} coordinates but the rows have {}",
            state.x.len(),
            p.m()
        )));
    }

    apply_update(&mut state.x, p, partition, w, &mut state.rng, k).map_err(|()| {
        Error::Diverged {
            iteration: k,
            trace: state.trace.clone(),
        }
    })?;
    state.iteration = k;
    for t in 0..state.sum.len() {
        state.sum[t] += state.x[t];
    }

    // Advance the replica until exactly the last ⌈αk⌉ iterates remain
    // between the two sums. The replica repeats already-counted work on
    // its own clone of the RNG stream, so it is monitoring overhead and
    // charges nothing to the cost model.
    let target = k - suffix_len(k, state.alpha);
    while state.lag_iteration < target {
        let kk = state.lag_iteration + 1;
        apply_update(&mut state.lag_x, p, partition, w, &mut state.lag_rng, kk).map_err(|()| {
            Error::Diverged {
                iteration: kk,
                trace: state.trace.clone(),
            }
        })?;
        state.lag_iteration = kk;
        for t in 0..state.lag_sum.len() {
            state.lag_sum[t] += state.lag_x[t];
        }
    }

    let b = partition.batch_size() as u64;
    let m = p.m() as u64;
    state.flops.add_dots(b * m);
    state.flops.add_batch_updates(b * m);
    state.flops.add_iterate_updates(2 * m);
    Ok(())
}

// ── Running ─────────────────────────────────────────────────────────────────

/// Outcome of [`run_nonsmooth`].
#[derive(Debug, Clone)]
pub struct NonSmoothRun {
    /// Checkpoints (iteration 0 included); the error field holds the
    /// objective gap of the tail average.
    pub trace: Vec<TraceRecord>,
    /// Final tail-averaged iterate.
    pub averaged: Vec<f64>,
    /// The plan the run executed.
    pub plan: NonSmoothPlan,
    /// First checkpoint iteration at which the gap reached `epsilon`.
    pub reached: Option<usize>,
}

/// Runs batched subgradient descent from zero for
/// `config.max_iterations` steps (required, ≥ 1), stopping early when
/// the tail average's objective gap falls to `config.epsilon` at a
/// checkpoint. Checkpoints land every `checkpoint_stride` iterations
/// (default: one effective epoch `n/b`) and at the final iteration.
pub fn run_nonsmooth(
    p: &HingeLossProblem,
    partition: &Partition,
    g: &LipschitzTable,
    config: &SolveConfig,
) -> Result<NonSmoothRun> {
    if p.x_star().is_none() || p.objective_star().is_none() {
        return Err(Error::MissingReference);
    }
    if partition.n() != p.n() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} rows but the system has {}",
            partition.n(),
            p.n()
        )));
    }
    if g.len() != partition.len() {
        return Err(Error::ShapeMismatch(format!(
            "subgradient-bound table has {} batches but the partition {}",
            g.len(),
            partition.len()
        )));
    }
    if config.max_iterations == 0 {
        return Err(Error::InvalidArgument(
            "hinge-loss runs need an explicit iteration budget of at least 1".to_string(),
        ));
    }

    let plan = plan_nonsmooth(g, p.lambda(), config.epsilon, config.alpha, config.c_abs)?;
    let weights = match config.mode {
        SamplingMode::Weighted => weights_nonsmooth(g),
        SamplingMode::Uniform => weights_uniform(partition.len())?,
    };
    let stride = config.checkpoint_stride.unwrap_or(partition.len()).max(1);
    let budget = config.max_iterations;

    let mut state = AveragedState::new(
        p.m(),
        partition.batch_size(),
        config.alpha,
        rng::stream(config.seed, rng::domain::TRIAL, config.trial),
    )?;
    state.flops.add_precompute(g.precompute_flops());

    let mut reached = None;
    let gap0 = p.gap(&state.x)?;
    state.trace.push(state.flops.record(0, gap0));
    if gap0 <= config.epsilon {
        reached = Some(0);
    } else {
        for k in 1..=budget {
            step_nonsmooth(&mut state, p, partition, &weights, k)?;
            if k % stride == 0 || k == budget {
                let gap = p.gap(&state.averaged())?;
                if !gap.is_finite() {
                    return Err(Error::Diverged {
                        iteration: k,
                        trace: state.trace,
                    });
                }
                state.trace.push(state.flops.record(k, gap));
                if gap <= config.epsilon {
                    reached = Some(k);
                    break;
                }
            }
        }
    }
    Ok(NonSmoothRun {
        averaged: state.averaged(),
        trace: state.trace,
        plan,
        reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batching::partition_random;
    use crate::matrix::{DenseMatrix, Estimator};
    use crate::weighting::lipschitz_hinge;

    fn tiny_rows_problem() -> HingeLossProblem {
        // Rows so small that every margin stays far below 1, so the
        // objective is exactly quadratic on the visited region with
        // minimizer (1/(λn))Σyᵢaᵢ.
        let a = DenseMatrix::from_rows(&[
            alloc::vec![0.01, 0.0],
            alloc::vec![0.0, -0.02],
            alloc::vec![0.005, 0.005],
            alloc::vec![-0.01, 0.01],
        ])
        .unwrap();
        HingeLossProblem::new(a, alloc::vec![1.0, -1.0, 1.0, -1.0], 1.0).unwrap()
    }

    fn random_problem(n: usize, m: usize, seed: u64) -> HingeLossProblem {
        let mut r = rng::stream(seed, rng::domain::GENERATOR, 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| rng::standard_normal_vec(&mut r, m))
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        HingeLossProblem::new(DenseMatrix::from_rows(&rows).unwrap(), y, 0.1).unwrap()
    }

    #[test]
    fn half_tail_overhead_is_one_plus_ln_two() {
        let g = LipschitzTable::from_values(alloc::vec![1.0], Estimator::Exact).unwrap();
        let plan = plan_nonsmooth(&g, 0.5, 1e-3, 0.5, 1.0).unwrap();
        assert!((plan.m_alpha - (1.0 + core::f64::consts::LN_2)).abs() <= 1e-15);
        assert_eq!(plan.mu, 0.5);
        let want = (1.0 + core::f64::consts::LN_2) / (0.5 * 1e-3);
        assert_eq!(plan.predicted_iterations, want.ceil() as usize);
    }

    #[test]
    fn tail_fraction_outside_the_open_interval_is_rejected() {
        let g = LipschitzTable::from_values(alloc::vec![1.0], Estimator::Exact).unwrap();
        for alpha in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                plan_nonsmooth(&g, 1.0, 1e-3, alpha, 1.0),
                Err(Error::InvalidArgument(_))
            ));
        }
        assert!(plan_nonsmooth(&g, 1.0, 1e-3, 0.99, 1.0).unwrap().m_alpha > 5.0);
    }

    #[test]
    fn orthonormal_bound_quarters_the_prediction_at_batch_four() {
        // Ḡ_τ = 1/√b + λ for orthonormal signed rows: with λ tiny the
        // predicted count scales like 1/b.
        let lambda = 1e-6;
        let g1 =
            LipschitzTable::from_values(alloc::vec![1.0 + lambda; 8], Estimator::Exact).unwrap();
        let g4 =
            LipschitzTable::from_values(alloc::vec![0.5 + lambda; 2], Estimator::Exact).unwrap();
        let k1 = plan_nonsmooth(&g1, lambda, 1e-3, 0.5, 1.0)
            .unwrap()
            .predicted_iterations as f64;
        let k4 = plan_nonsmooth(&g4, lambda, 1e-3, 0.5, 1.0)
            .unwrap()
            .predicted_iterations as f64;
        let ratio = k4 / k1;
        assert!((0.24..=0.26).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn inactive_margins_leave_only_the_regularizer() {
        let a = DenseMatrix::from_rows(&[alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]]).unwrap();
        let p = HingeLossProblem::new(a, alloc::vec![1.0, -1.0], 0.3).unwrap();
        // Margins: 1·x₀ = 2 and (−1)·x₁ = 2 — both inactive.
        let x = alloc::vec![2.0, -2.0];
        let g = hinge_subgradient_batch(&p, &[0, 1], &x).unwrap();
        assert_eq!(g, alloc::vec![0.3 * 2.0, 0.3 * -2.0]);
    }

    #[test]
    fn zero_point_activates_every_row() {
        let p = random_problem(6, 3, 17);
        let x = alloc::vec![0.0; 3];
        let tau = [4usize, 1, 3];
        let g = hinge_subgradient_batch(&p, &tau, &x).unwrap();
        for t in 0..3 {
            let mut want = 0.0;
            for &j in &[1usize, 3, 4] {
                want += p.labels()[j] * p.a().row(j)[t];
            }
            want *= -1.0 / 3.0;
            assert!((g[t] - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn exact_boundary_margin_contributes_nothing() {
        let a = DenseMatrix::from_rows(&[alloc::vec![1.0, 0.0]]).unwrap();
        let p = HingeLossProblem::new(a, alloc::vec![1.0], 0.7).unwrap();
        let x = alloc::vec![1.0, 5.0]; // margin = 1 exactly
        let g = hinge_subgradient_batch(&p, &[0], &x).unwrap();
        assert_eq!(g, alloc::vec![0.7, 0.7 * 5.0]);
    }

    #[test]
    fn subgradient_supports_the_objective_from_below() {
        let p = random_problem(10, 3, 23);
        let tau: Vec<usize> = (0..10).collect();
        let mut r = rng::stream(5, rng::domain::TRIAL, 1);
        for _ in 0..100 {
            let x = rng::standard_normal_vec(&mut r, 3);
            let z = rng::standard_normal_vec(&mut r, 3);
            let g = hinge_subgradient_batch(&p, &tau, &x).unwrap();
            let lower: f64 = p.objective(&x)
                + g.iter()
                    .zip(z.iter().zip(&x))
                    .map(|(gi, (zi, xi))| gi * (zi - xi))
                    .sum::<f64>();
            assert!(p.objective(&z) >= lower - 1e-10);
        }
    }

    #[test]
    fn single_batch_reduces_to_deterministic_descent() {
        let p = random_problem(8, 3, 31);
        let partition = partition_random(8, 8, 0).unwrap();
        let w = weights_uniform(1).unwrap();
        let mut state =
            AveragedState::new(3, 8, 0.5, rng::stream(2, rng::domain::TRIAL, 0)).unwrap();
        let mut mirror = alloc::vec![0.0; 3];
        let tau: Vec<usize> = (0..8).collect();
        for k in 1..=20 {
            step_nonsmooth(&mut state, &p, &partition, &w, k).unwrap();
            let g = hinge_subgradient_batch(&p, &tau, &mirror).unwrap();
            let step = 1.0 / (p.lambda() * k as f64);
            for t in 0..3 {
                mirror[t] -= step * g[t];
            }
            let scale = math::sqrt(math::norm_sq(&mirror)).max(1.0);
            for t in 0..3 {
                assert!((state.x[t] - mirror[t]).abs() <= 1e-12 * scale, "step {k}");
            }
        }
    }

    #[test]
    fn regularizer_only_steps_follow_the_closed_form_decay() {
        // All-zero rows keep every margin at 0 (< 1) but contribute a
        // zero row sum, so the update is exactly x·(1 − 1/(k·d·p)).
        let a = DenseMatrix::from_rows(&[alloc::vec![0.0], alloc::vec![0.0]]).unwrap();
        let p = HingeLossProblem::new(a, alloc::vec![1.0, -1.0], 2.0).unwrap();
        let partition = partition_random(2, 2, 0).unwrap();
        let w = weights_uniform(1).unwrap();
        let mut state =
            AveragedState::new(1, 2, 0.5, rng::stream(3, rng::domain::TRIAL, 0)).unwrap();
        state.x[0] = 0.7;
        state.iteration = 3;
        state.lag_iteration = 3;
        step_nonsmooth(&mut state, &p, &partition, &w, 4).unwrap();
        assert_eq!(state.x[0], 0.75 * 0.7);
        step_nonsmooth(&mut state, &p, &partition, &w, 5).unwrap();
        assert_eq!(state.x[0], 0.8 * (0.75 * 0.7));
    }

    #[test]
    fn out_of_order_steps_are_rejected() {
        let p = tiny_rows_problem();
        let partition = partition_random(4, 2, 1).unwrap();
        let w = weights_uniform(2).unwrap();
        let mut state =
            AveragedState::new(2, 2, 0.5, rng::stream(4, rng::domain::TRIAL, 0)).unwrap();
        assert!(matches!(
            step_nonsmooth(&mut state, &p, &partition, &w, 2),
            Err(Error::InvalidArgument(_))
        ));
        step_nonsmooth(&mut state, &p, &partition, &w, 1).unwrap();
        assert!(matches!(
            step_nonsmooth(&mut state, &p, &partition, &w, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn two_accumulator_average_matches_stored_iterates() {
        let p = random_problem(12, 3, 41);
        let partition = partition_random(12, 3, 7).unwrap();
        let g =
            lipschitz_hinge(&p.signed_matrix(), &partition, p.lambda(), Estimator::Exact).unwrap();
        let w = weights_nonsmooth(&g);
        for alpha in [0.5, 0.3] {
            let mut state =
                AveragedState::new(3, 3, alpha, rng::stream(6, rng::domain::TRIAL, 2)).unwrap();
            let mut stored: Vec<Vec<f64>> = Vec::new();
            for k in 1..=300 {
                step_nonsmooth(&mut state, &p, &partition, &w, k).unwrap();
                stored.push(state.x.clone());
                let len = suffix_len(k, alpha);
                let mut want = alloc::vec![0.0; 3];
                for it in &stored[k - len..] {
                    for t in 0..3 {
                        want[t] += it[t];
                    }
                }
                let avg = state.averaged();
                for t in 0..3 {
                    assert!(
                        (avg[t] - want[t] / len as f64).abs() <= 1e-12,
                        "k={k} α={alpha}"
                    );
                }
            }
        }
    }

    #[test]
    fn importance_weighting_is_unbiased_over_all_batches() {
        let p = random_problem(12, 3, 47);
        let partition = partition_random(12, 4, 9).unwrap();
        let g =
            lipschitz_hinge(&p.signed_matrix(), &partition, p.lambda(), Estimator::Exact).unwrap();
        let w = weights_nonsmooth(&g);
        let d = partition.len() as f64;
        let full: Vec<usize> = (0..12).collect();
        let mut r = rng::stream(8, rng::domain::TRIAL, 3);
        for _ in 0..20 {
            let x = rng::standard_normal_vec(&mut r, 3);
            let want = hinge_subgradient_batch(&p, &full, &x).unwrap();
            let mut mixed = alloc::vec![0.0; 3];
            for (i, batch) in partition.batches().iter().enumerate() {
                let gi = hinge_subgradient_batch(&p, batch, &x).unwrap();
                let weight = w.probabilities()[i] / (d * w.probabilities()[i]);
                for t in 0..3 {
                    mixed[t] += weight * gi[t];
                }
            }
            for t in 0..3 {
                assert!((mixed[t] - want[t]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn regularizer_dominated_run_closes_the_gap() {
        let p = tiny_rows_problem().with_reference();
        let partition = partition_random(4, 2, 3).unwrap();
        let g =
            lipschitz_hinge(&p.signed_matrix(), &partition, p.lambda(), Estimator::Exact).unwrap();
        let mut config = SolveConfig::new(1e-7, 77).with_trial(1);
        config.max_iterations = 50_000;
        let run1 = run_nonsmooth(&p, &partition, &g, &config).unwrap();
        let run2 = run_nonsmooth(&p, &partition, &g, &config).unwrap();
        assert_eq!(run1.trace, run2.trace);
        let k = run1.reached.expect("tiny-row system converges");
        assert!(k >= 1);
        assert!(p.gap(&run1.averaged).unwrap() <= 1e-6);
        assert_eq!(run1.trace.last().unwrap().iteration, k);
    }

    #[test]
    fn missing_budget_or_reference_is_rejected() {
        let with_ref = tiny_rows_problem().with_reference();
        let partition = partition_random(4, 2, 3).unwrap();
        let g = lipschitz_hinge(
            &with_ref.signed_matrix(),
            &partition,
            with_ref.lambda(),
            Estimator::Exact,
        )
        .unwrap();
        let config = SolveConfig::new(1e-7, 1);
        assert!(matches!(
            run_nonsmooth(&with_ref, &partition, &g, &config),
            Err(Error::InvalidArgument(_))
        ));
        let bare = tiny_rows_problem();
        let mut budgeted = SolveConfig::new(1e-7, 1);
        budgeted.max_iterations = 10;
        assert!(matches!(
            run_nonsmooth(&bare, &partition, &g, &budgeted),
            Err(Error::MissingReference)
        ));
    }

    #[test]
    fn flop_totals_follow_the_iteration_model() {
        let p = tiny_rows_problem().with_reference();
        let partition = partition_random(4, 2, 5).unwrap();
        let g =
            lipschitz_hinge(&p.signed_matrix(), &partition, p.lambda(), Estimator::Exact).unwrap();
        let mut config = SolveConfig::new(1e-30, 9);
        config.max_iterations = 6;
        config.checkpoint_stride = Some(1);
        let run = run_nonsmooth(&p, &partition, &g, &config).unwrap();
        let (b, m) = (2u64, 2u64);
        let pre = g.precompute_flops();
        for rec in &run.trace {
            let k = rec.iteration as u64;
            assert_eq!(rec.flops_single, pre + k * (2 * b + 2) * m);
            assert_eq!(rec.flops_shared, pre.div_ceil(b) + k * 4 * m);
        }
    }
}
