//! Run configuration shared by the smooth and non-smooth solvers.

use crate::matrix::Estimator;

/// How batches are drawn at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Each batch with probability `1/d`.
    Uniform,
    /// Batches drawn with probabilities proportional to the applicable
    /// weight formula, gradients rescaled by `1/(d·p)` to stay unbiased.
    Weighted,
}

/// Everything a solver run needs beyond the problem, partition, and
/// Lipschitz table.
///
/// `epsilon` is the target *squared* distance to the reference solution
/// for the least-squares solver and the target objective gap for the
/// hinge solver. `epsilon0` is the initial squared distance; when absent
/// it is measured from the zero start. When `step_estimator` is set and
/// differs from the sampling table's backend, step-size planning uses a
/// second table built with that backend while sampling keeps the first —
/// the "approximate sampling, exact stepping" configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Target accuracy (squared error or objective gap; see above).
    pub epsilon: f64,
    /// Initial squared error override; measured from the start when `None`.
    pub epsilon0: Option<f64>,
    /// Uniform or weighted batch sampling.
    pub mode: SamplingMode,
    /// Backend for the step-size table when it should differ from the
    /// sampling table's backend.
    pub step_estimator: Option<Estimator>,
    /// Multiplier applied to measured batch residual norms when bounding
    /// the gradient noise for step-size planning.
    pub residual_bound_factor: f64,
    /// Base RNG seed; combined with `trial` into an independent stream.
    pub seed: u64,
    /// Trial index within a multi-trial experiment.
    pub trial: u64,
    /// Explicit iteration budget. The least-squares run treats it as a
    /// floor combined with the planned iteration count; the hinge run
    /// treats it as the whole budget and requires it to be positive.
    pub max_iterations: usize,
    /// Checkpoint spacing in iterations; one effective epoch (`n/b`)
    /// when `None`.
    pub checkpoint_stride: Option<usize>,
    /// Tail fraction for suffix averaging in the hinge solver.
    pub alpha: f64,
    /// Absolute planning constant for the hinge iteration count.
    pub c_abs: f64,
}

impl SolveConfig {
    /// Weighted-sampling configuration with library defaults: residual
    /// bound factor 1.1, tail fraction ½, planning constant 1, trial 0,
    /// no explicit budget, epoch-spaced checkpoints.
    pub fn new(epsilon: f64, seed: u64) -> Self {
        SolveConfig {
            epsilon,
            epsilon0: None,
            mode: SamplingMode::Weighted,
            step_estimator: None,
            residual_bound_factor: 1.1,
            seed,
            trial: 0,
            max_iterations: 0,
            checkpoint_stride: None,
            alpha: 0.5,
            c_abs: 1.0,
        }
    }

    /// Same defaults with uniform sampling.
    pub fn uniform(epsilon: f64, seed: u64) -> Self {
        SolveConfig {
            mode: SamplingMode::Uniform,
            ..SolveConfig::new(epsilon, seed)
        }
    }

    /// Builder-style trial index.
    pub fn with_trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }
}
