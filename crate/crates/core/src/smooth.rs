//! Batched SGD with importance sampling for least squares.
//!
//! With the rows partitioned into `d = n/b` batches `{τ₁, …, τ_d}`, each
//! iteration samples a batch index `i` from the weight table and applies
//!
//! ```text
//! x ← x − (γ / p(τᵢ)) · A_τᵢ*(A_τᵢ x − b_τᵢ),
//! ```
//!
//! which equals the unbiased importance-rescaled step
//! `x − γ/(d·p(τᵢ))·∇g_τᵢ(x)` for the batch functionals
//! `g_τᵢ = (1/b)Σ_{j∈τᵢ} f_j`. With the weighted table the step size
//!
//! ```text
//! γ = (ε/4) / (ε·Σᵢ‖A_τᵢ‖² + σ_min⁻²·σ̂²-term),
//! σ̂²-term = d·Σᵢ‖A_τᵢ‖²·(factor·‖A_τᵢx* − b_τᵢ‖)²,
//! ```
//!
//! drives the expected squared distance to the least-squares solution
//! below `ε` within a predictable number of iterations; on a consistent
//! system it reduces to `γ = 1/(4Σᵢ‖A_τᵢ‖²)`. Uniform sampling uses the
//! same functional form with the weighted sums replaced by their worst
//! batch (`d·sup` instead of `Σ`), and needs roughly half the
//! per-iteration log factor but a worst-case step size.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::batching::Partition;
use crate::config::{SamplingMode, SolveConfig};
use crate::math;
use crate::matrix::smallest_singular_value;
use crate::problems::LeastSquaresProblem;
use crate::trace::{FlopModel, TraceRecord};
use crate::weighting::{
    lipschitz_ls, weights_smooth, weights_uniform, LipschitzTable, WeightTable,
};
use crate::{rng, Error, Result};

// ── Plans ───────────────────────────────────────────────────────────────────

/// Step size and iteration prediction for one least-squares run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothStepPlan {
    /// Fixed step size γ.
    pub gamma: f64,
    /// Iterations predicted to drive the expected squared error to
    /// `epsilon`; at least 1.
    pub predicted_iterations: usize,
    /// Target expected squared error.
    pub epsilon: f64,
    /// Initial squared error `‖x₀ − x*‖²`.
    pub epsilon0: f64,
    /// Bound on the batched gradient noise at the minimizer entering the
    /// step size (residual term scaled by the configured factor).
    pub sigma_tau_sq_bound: f64,
    /// Strong convexity `σ_min(A)²` of the objective.
    pub mu: f64,
}

fn validate_plan_inputs(
    p: &LeastSquaresProblem,
    partition: &Partition,
    l: &LipschitzTable,
    epsilon: f64,
    epsilon0: f64,
    residual_bound_factor: f64,
) -> Result<()> {
    if partition.n() != p.n() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} rows but the system has {}",
            partition.n(),
            p.n()
        )));
    }
    if l.len() != partition.len() {
        return Err(Error::ShapeMismatch(format!(
            "Lipschitz table has {} batches but the partition {}",
            l.len(),
            partition.len()
        )));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(
            "target accuracy must be a positive finite number".to_string(),
        ));
    }
    if !epsilon0.is_finite() || epsilon0 < 0.0 {
        return Err(Error::InvalidArgument(
            "initial squared error must be finite and nonnegative".to_string(),
        ));
    }
    if !residual_bound_factor.is_finite() || residual_bound_factor < 0.0 {
        return Err(Error::InvalidArgument(
            "residual bound factor must be finite and nonnegative".to_string(),
        ));
    }
    Ok(())
}

/// Per-batch squared residual norms `‖A_τᵢ x* − b_τᵢ‖²` at the reference.
fn batch_residual_sq(p: &LeastSquaresProblem, partition: &Partition) -> Result<Vec<f64>> {
    let x_star = p.x_star().ok_or(Error::MissingReference)?;
    let r = p.residual(x_star);
    Ok(partition
        .batches()
        .iter()
        .map(|batch| batch.iter().map(|&j| r[j] * r[j]).sum())
        .collect())
}

fn ceil_at_least_one(value: f64) -> usize {
    if value >= 1.0 {
        math::ceil(value) as usize
    } else {
        1
    }
}

/// Weighted-sampling step plan.
///
/// Uses the table's values both for `Σᵢ‖A_τᵢ‖²` (their mean, because the
/// values carry the `n/b` scaling) and for the residual noise term, with
/// measured batch residuals inflated by `residual_bound_factor`. The
/// prediction clamps to one iteration when `epsilon0 ≤ epsilon/2`
/// already holds.
pub fn plan_smooth(
    p: &LeastSquaresProblem,
    partition: &Partition,
    l: &LipschitzTable,
    epsilon: f64,
    epsilon0: f64,
    residual_bound_factor: f64,
) -> Result<SmoothStepPlan> {
    validate_plan_inputs(p, partition, l, epsilon, epsilon0, residual_bound_factor)?;
    let sigma = smallest_singular_value(p.a())?;
    let mu = sigma * sigma;
    let rsq = batch_residual_sq(p, partition)?;
    // Σᵢ‖A_τᵢ‖²(est): values are (n/b)·‖A_τᵢ‖², so the mean over d = n/b
    // batches is exactly the unscaled sum.
    let batch_norm_sum = l.mean();
    // d·Σᵢ‖A_τᵢ‖²‖r_τᵢ‖² = Σᵢ values[i]·‖r_τᵢ‖².
    let residual_sum: f64 = l.values().iter().zip(&rsq).map(|(&v, &r)| v * r).sum();
    let sigma_tau_sq_bound = residual_bound_factor * residual_bound_factor * residual_sum;
    let gamma = (epsilon / 4.0) / (epsilon * batch_norm_sum + sigma_tau_sq_bound / mu);
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidArgument(
            "degenerate system yields no positive step size".to_string(),
        ));
    }
    let log_term = math::ln(2.0 * epsilon0 / epsilon);
    let predicted =
        4.0 * log_term * (batch_norm_sum / mu + sigma_tau_sq_bound / (mu * mu * epsilon));
    Ok(SmoothStepPlan {
        gamma,
        predicted_iterations: ceil_at_least_one(predicted),
        epsilon,
        epsilon0,
        sigma_tau_sq_bound,
        mu,
    })
}

/// Uniform-sampling step plan: the weighted plan's functional form with
/// every batch average replaced by its worst case (`d·sup‖A_τᵢ‖²` for the
/// norm sum, `d²·sup` of the per-batch residual product for the noise),
/// and half the prediction's leading constant.
pub fn plan_smooth_uniform(
    p: &LeastSquaresProblem,
    partition: &Partition,
    l: &LipschitzTable,
    epsilon: f64,
    epsilon0: f64,
    residual_bound_factor: f64,
) -> Result<SmoothStepPlan> {
    validate_plan_inputs(p, partition, l, epsilon, epsilon0, residual_bound_factor)?;
    let sigma = smallest_singular_value(p.a())?;
    let mu = sigma * sigma;
    let rsq = batch_residual_sq(p, partition)?;
    // d·sup‖A_τᵢ‖² = sup values[i].
    let sup_norm = l.values().iter().cloned().fold(0.0f64, f64::max);
    // d²·sup(‖A_τᵢ‖²‖r_τᵢ‖²) = d·sup(values[i]·‖r_τᵢ‖²).
    let d = partition.len() as f64;
    let sup_residual = l
        .values()
        .iter()
        .zip(&rsq)
        .map(|(&v, &r)| v * r)
        .fold(0.0f64, f64::max);
    let sigma_sq_bound = residual_bound_factor * residual_bound_factor * d * sup_residual;
    let gamma = (epsilon / 4.0) / (epsilon * sup_norm + sigma_sq_bound / mu);
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidArgument(
            "degenerate system yields no positive step size".to_string(),
        ));
    }
    let log_term = math::ln(2.0 * epsilon0 / epsilon);
    let predicted = 2.0 * log_term * (sup_norm / mu + sigma_sq_bound / (mu * mu * epsilon));
    Ok(SmoothStepPlan {
        gamma,
        predicted_iterations: ceil_at_least_one(predicted),
        epsilon,
        epsilon0,
        sigma_tau_sq_bound: sigma_sq_bound,
        mu,
    })
}

// ── Stepping ────────────────────────────────────────────────────────────────

/// Mutable state of one solver run.
#[derive(Debug, Clone)]
pub struct RunState {
    /// Current iterate.
    pub x: Vec<f64>,
    /// Completed iterations.
    pub iteration: usize,
    /// Batch-sampling stream.
    pub rng: ChaCha8Rng,
    /// Checkpoints recorded so far.
    pub trace: Vec<TraceRecord>,
    /// Cost counters.
    pub flops: FlopModel,
}

impl RunState {
    /// Zero start in dimension `m` for batches of `batch_size` rows.
    pub fn new(m: usize, batch_size: usize, rng: ChaCha8Rng) -> Self {
        RunState {
            x: alloc::vec![0.0; m],
            iteration: 0,
            rng,
            trace: Vec::new(),
            flops: FlopModel::new(batch_size),
        }
    }
}

/// One iteration: samples a batch from `w` and applies the update
/// `x ← x − (γ/p(τ))·A_τ*(A_τ x − b_τ)`.
///
/// The per-row products are independent (safe to farm out to one worker
/// per row); their reduction into the update direction runs in ascending
/// row-index order so the result does not depend on worker count. A
/// non-finite residual aborts with a divergence error carrying the trace
/// recorded so far.
pub fn step_smooth(
    state: &mut RunState,
    p: &LeastSquaresProblem,
    partition: &Partition,
    w: &WeightTable,
    gamma: f64,
) -> Result<()> {
    let i = crate::weighting::sample(w, &mut state.rng);
    let scale = gamma / w.probabilities()[i];
    let mut indices = partition.batch(i).to_vec();
    indices.sort_unstable();

    let m = p.m();
    let mut direction = alloc::vec![0.0; m];
    for &j in &indices {
        let row = p.a().row(j);
        let r = math::dot(row, &state.x) - p.rhs()[j];
        if !r.is_finite() {
            return Err(Error::Diverged {
                iteration: state.iteration + 1,
                trace: state.trace.clone(),
            });
        }
        for t in 0..m {
            direction[t] += r * row[t];
        }
    }
    for t in 0..m {
        state.x[t] -= scale * direction[t];
    }

    let b = indices.len() as u64;
    state.flops.add_dots(b * m as u64);
    state.flops.add_batch_updates(b * m as u64);
    state.flops.add_iterate_updates(m as u64);
    state.iteration += 1;
    Ok(())
}

// ── Running ─────────────────────────────────────────────────────────────────

/// Outcome of [`run_smooth`].
#[derive(Debug, Clone)]
pub struct SmoothRun {
    /// Checkpoints (iteration 0 included).
    pub trace: Vec<TraceRecord>,
    /// Final iterate.
    pub x: Vec<f64>,
    /// The plan the run executed.
    pub plan: SmoothStepPlan,
    /// First checkpoint iteration at which the error reached `√ε`, if any.
    pub reached: Option<usize>,
}

/// Runs batched SGD from zero until a checkpoint error falls to `√ε` or
/// the budget `max(config.max_iterations, predicted_iterations)` runs out.
///
/// `l` is the sampling table; when `config.step_estimator` names a
/// different backend, a second table built with it drives the step-size
/// plan (both precomputations are charged). Checkpoints land every
/// `checkpoint_stride` iterations (default: one effective epoch `n/b`)
/// and at the final iteration.
pub fn run_smooth(
    p: &LeastSquaresProblem,
    partition: &Partition,
    l: &LipschitzTable,
    config: &SolveConfig,
) -> Result<SmoothRun> {
    let x_star_norm_sq = {
        let x_star = p.x_star().ok_or(Error::MissingReference)?;
        math::norm_sq(x_star)
    };
    let epsilon0 = config.epsilon0.unwrap_or(x_star_norm_sq);

    let step_table = match config.step_estimator {
        Some(est) if est != l.estimator() => Some(lipschitz_ls(p.a(), partition, est)?),
        _ => None,
    };
    let plan_table = step_table.as_ref().unwrap_or(l);
    let plan = match config.mode {
        SamplingMode::Weighted => plan_smooth(
            p,
            partition,
            plan_table,
            config.epsilon,
            epsilon0,
            config.residual_bound_factor,
        )?,
        SamplingMode::Uniform => plan_smooth_uniform(
            p,
            partition,
            plan_table,
            config.epsilon,
            epsilon0,
            config.residual_bound_factor,
        )?,
    };
    let weights = match config.mode {
        SamplingMode::Weighted => weights_smooth(l),
        SamplingMode::Uniform => weights_uniform(partition.len())?,
    };

    let stride = config.checkpoint_stride.unwrap_or(partition.len()).max(1);
    let budget = config.max_iterations.max(plan.predicted_iterations);
    let target = math::sqrt(config.epsilon);

    let mut state = RunState::new(
        p.m(),
        partition.batch_size(),
        rng::stream(config.seed, rng::domain::TRIAL, config.trial),
    );
    state.flops.add_precompute(l.precompute_flops());
    if let Some(t) = &step_table {
        state.flops.add_precompute(t.precompute_flops());
    }

    let mut reached = None;
    let error0 = p.error(&state.x)?;
    state.trace.push(state.flops.record(0, error0));
    if error0 <= target {
        reached = Some(0);
    } else {
        for k in 1..=budget {
            step_smooth(&mut state, p, partition, &weights, plan.gamma)?;
            if k % stride == 0 || k == budget {
                let error = p.error(&state.x)?;
                if !error.is_finite() {
                    return Err(Error::Diverged {
                        iteration: k,
                        trace: state.trace,
                    });
                }
                state.trace.push(state.flops.record(k, error));
                if error <= target {
                    reached = Some(k);
                    break;
                }
            }
        }
    }
    Ok(SmoothRun {
        trace: state.trace,
        x: state.x,
        plan,
        reached,
    })
}

// ── Predicted speedup and noise moments ─────────────────────────────────────

/// Predicted iteration-count ratio between single-row and batched
/// weighted sampling, clamped to `[1, b]`.
///
/// On a consistent system (reference residual below `1e-9·max(1, ‖b‖)`)
/// this is exactly `‖A‖_F² / Σᵢ‖A_τᵢ‖²`; otherwise the full prediction
/// ratio with true (unscaled) residuals at the target accuracy `epsilon`.
/// The batch norms come from the supplied table, so the prediction
/// quality follows the table's backend.
pub fn speedup_ratio(
    p: &LeastSquaresProblem,
    partition: &Partition,
    l: &LipschitzTable,
    epsilon: f64,
) -> Result<f64> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(
            "target accuracy must be a positive finite number".to_string(),
        ));
    }
    if partition.n() != p.n() || l.len() != partition.len() {
        return Err(Error::ShapeMismatch(
            "partition and table must match the system".to_string(),
        ));
    }
    let x_star = p.x_star().ok_or(Error::MissingReference)?;
    let residual_norm = p.residual_norm().unwrap_or_else(|| {
        let r = p.residual(x_star);
        math::sqrt(math::norm_sq(&r))
    });
    let frob = p.a().frobenius_norm_sq();
    let batch_norm_sum = l.mean();
    let b = partition.batch_size() as f64;

    let rhs_norm = math::sqrt(math::norm_sq(p.rhs()));
    let ratio = if residual_norm <= 1e-9 * rhs_norm.max(1.0) {
        frob / batch_norm_sum
    } else {
        let sigma = smallest_singular_value(p.a())?;
        let mu = sigma * sigma;
        let r = p.residual(x_star);
        let n = p.n() as f64;
        let mut single_noise = 0.0;
        for j in 0..p.n() {
            let row = p.a().row(j);
            single_noise += math::dot(row, row) * r[j] * r[j];
        }
        single_noise *= n;
        let rsq = batch_residual_sq(p, partition)?;
        let batch_noise: f64 = l.values().iter().zip(&rsq).map(|(&v, &q)| v * q).sum();
        let numerator = epsilon * frob + single_noise / mu;
        let denominator = epsilon * batch_norm_sum + batch_noise / mu;
        numerator / denominator
    };
    Ok(ratio.max(1.0).min(b))
}

/// Average squared single-row gradient norm at the reference,
/// `(1/n)Σᵢ‖∇fᵢ(x*)‖² = n·Σᵢ‖aᵢ‖²·rᵢ²`.
pub fn gradient_noise_single(p: &LeastSquaresProblem) -> Result<f64> {
    let x_star = p.x_star().ok_or(Error::MissingReference)?;
    let r = p.residual(x_star);
    let mut acc = 0.0;
    for j in 0..p.n() {
        let row = p.a().row(j);
        acc += math::dot(row, row) * r[j] * r[j];
    }
    Ok(p.n() as f64 * acc)
}

/// Average squared batch gradient norm at the reference,
/// `(1/d)Σᵢ‖∇g_τᵢ(x*)‖² = d·Σᵢ‖A_τᵢ*r_τᵢ‖²`.
pub fn gradient_noise_batched(p: &LeastSquaresProblem, partition: &Partition) -> Result<f64> {
    if partition.n() != p.n() {
        return Err(Error::ShapeMismatch(
            "partition must cover the system's rows".to_string(),
        ));
    }
    let x_star = p.x_star().ok_or(Error::MissingReference)?;
    let r = p.residual(x_star);
    let m = p.m();
    let mut acc = 0.0;
    for batch in partition.batches() {
        let mut indices = batch.to_vec();
        indices.sort_unstable();
        let mut v = alloc::vec![0.0; m];
        for &j in &indices {
            let row = p.a().row(j);
            for t in 0..m {
                v[t] += r[j] * row[t];
            }
        }
        acc += math::norm_sq(&v);
    }
    Ok(partition.len() as f64 * acc)
}
