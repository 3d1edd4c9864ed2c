//! Multi-trial configuration sweeps.
//!
//! A sweep is the cartesian product of batch sizes, batching strategies,
//! sampling modes, and norm estimators, each run for `trials` independent
//! sampling streams on one shared problem instance. Runs are capped at a
//! fixed epoch budget and never stop early, so every trace shows the full
//! trajectory; iterations-to-target statistics are read off the traces
//! afterwards, censored at the budget when a run never gets there. A
//! classical baseline (b = 1, uniform sampling, exact norms) is always
//! included so the summary can report speedups against it.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use bwsgd::batching::Partition;
use bwsgd::nonsmooth::{plan_nonsmooth, step_nonsmooth, AveragedState};
use bwsgd::problems::{generate, HingeLossProblem, LeastSquaresProblem, Problem};
use bwsgd::rng;
use bwsgd::smooth::{plan_smooth, plan_smooth_uniform, step_smooth, RunState};
use bwsgd::trace::{first_at_or_below, TraceRecord};
use bwsgd::weighting::{
    lipschitz_hinge, lipschitz_ls, weights_nonsmooth, weights_smooth, weights_uniform,
    LipschitzTable, WeightTable,
};

use crate::{
    build_partition, io, prepare_out_dir, EstimatorArg, GeneratorArgs, ModeArg, StrategyArg,
};

// ── Specification ───────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Base seed for the instance, partitions, estimators, and trials.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Batch sizes to sweep (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8, 16, 32])]
    pub batch_sizes: Vec<usize>,
    /// Batching strategies to sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![StrategyArg::Random])]
    pub strategies: Vec<StrategyArg>,
    /// Sampling modes to sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ModeArg::Weighted])]
    pub modes: Vec<ModeArg>,
    /// Norm estimators to sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![EstimatorArg::Exact])]
    pub estimators: Vec<EstimatorArg>,
    /// Also run each approximate estimator with exact step sizes while it
    /// keeps driving the sampling weights.
    #[arg(long)]
    pub opt_step_exact: bool,
    /// Accuracy of the fixed-budget power estimator.
    #[arg(long, default_value_t = 0.01)]
    pub pm_epsilon: f64,
    /// Independent sampling streams per configuration.
    #[arg(long, default_value_t = 40)]
    pub trials: u64,
    /// Target L2 error (least squares) or objective gap (hinge).
    #[arg(long, default_value_t = 1e-5)]
    pub target_error: f64,
    /// Iteration budget in effective epochs (n/b iterations each).
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
    /// Checkpoint spacing; defaults to one effective epoch.
    #[arg(long)]
    pub checkpoint_stride: Option<usize>,
    /// Tail fraction for hinge suffix averaging.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Worker threads for concurrent trials (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl ExperimentArgs {
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            generator: self.generator.clone(),
            seed: self.seed,
            batch_sizes: self.batch_sizes.clone(),
            strategies: self.strategies.clone(),
            modes: self.modes.clone(),
            estimators: self.estimators.clone(),
            opt_step_exact: self.opt_step_exact,
            pm_epsilon: self.pm_epsilon,
            trials: self.trials,
            target_error: self.target_error,
            max_epochs: self.max_epochs,
            checkpoint_stride: self.checkpoint_stride,
            alpha: self.alpha,
            workers: self.workers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Resolved sweep settings, echoed verbatim to `spec.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub generator: GeneratorArgs,
    pub seed: u64,
    pub batch_sizes: Vec<usize>,
    pub strategies: Vec<StrategyArg>,
    pub modes: Vec<ModeArg>,
    pub estimators: Vec<EstimatorArg>,
    pub opt_step_exact: bool,
    pub pm_epsilon: f64,
    pub trials: u64,
    pub target_error: f64,
    pub max_epochs: usize,
    pub checkpoint_stride: Option<usize>,
    pub alpha: f64,
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.batch_sizes.is_empty(),
            "batch-sizes must not be empty"
        );
        ensure!(!self.strategies.is_empty(), "strategies must not be empty");
        ensure!(!self.modes.is_empty(), "modes must not be empty");
        ensure!(!self.estimators.is_empty(), "estimators must not be empty");
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(
            self.target_error.is_finite() && self.target_error > 0.0,
            "target-error must be positive"
        );
        ensure!(
            self.pm_epsilon > 0.0 && self.pm_epsilon < 1.0,
            "pm-epsilon must lie in (0, 1)"
        );
        ensure!(self.max_epochs >= 1, "max-epochs must be at least 1");
        ensure!(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie strictly between 0 and 1"
        );
        Ok(())
    }
}

// ── Configurations ──────────────────────────────────────────────────────────

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    pub batch_size: usize,
    pub strategy: StrategyArg,
    pub mode: ModeArg,
    pub sampling: EstimatorArg,
    pub step: EstimatorArg,
    /// Marks the classical comparison arm (b = 1, uniform, exact norms).
    pub baseline: bool,
}

impl Config {
    /// Stable, filesystem-safe identifier used in file names and the
    /// summary CSV.
    pub fn id(&self) -> String {
        let mut id = format!(
            "b{}_{}_{}_{}",
            self.batch_size,
            self.strategy.label(),
            self.mode.label(),
            self.sampling.label()
        );
        if self.step != self.sampling {
            id.push_str("_step-");
            id.push_str(self.step.label());
        }
        id
    }

    fn same_point(&self, other: &Config) -> bool {
        self.batch_size == other.batch_size
            && self.strategy == other.strategy
            && self.mode == other.mode
            && self.sampling == other.sampling
            && self.step == other.step
    }
}

/// Expands the sweep, adds "(opt)" step variants for approximate
/// estimators when requested, dedupes, and guarantees the baseline arm.
///
/// Step variants only exist on the smooth path: the hinge step size is
/// `1/(λk)` rescaled by the sampling probability and uses no norm table.
pub fn build_configs(spec: &ExperimentSpec, smooth: bool) -> Vec<Config> {
    let mut configs: Vec<Config> = Vec::new();
    let mut push = |c: Config| {
        if !configs.iter().any(|q| q.same_point(&c)) {
            configs.push(c);
        }
    };
    for &batch_size in &spec.batch_sizes {
        for &strategy in &spec.strategies {
            for &mode in &spec.modes {
                for &est in &spec.estimators {
                    push(Config {
                        batch_size,
                        strategy,
                        mode,
                        sampling: est,
                        step: est,
                        baseline: false,
                    });
                    if smooth && spec.opt_step_exact && est != EstimatorArg::Exact {
                        push(Config {
                            batch_size,
                            strategy,
                            mode,
                            sampling: est,
                            step: EstimatorArg::Exact,
                            baseline: false,
                        });
                    }
                }
            }
        }
    }
    let baseline = Config {
        batch_size: 1,
        strategy: StrategyArg::Random,
        mode: ModeArg::Uniform,
        sampling: EstimatorArg::Exact,
        step: EstimatorArg::Exact,
        baseline: true,
    };
    if let Some(existing) = configs.iter_mut().find(|c| c.same_point(&baseline)) {
        existing.baseline = true;
    } else {
        configs.push(baseline);
    }
    configs
}

// ── Instances ───────────────────────────────────────────────────────────────

enum Instance {
    Smooth(LeastSquaresProblem),
    NonSmooth(HingeLossProblem),
}

impl Instance {
    fn from_spec(spec: &ExperimentSpec) -> Result<Self> {
        let problem = generate(&spec.generator.to_spec(spec.seed))?;
        Ok(match problem {
            Problem::LeastSquares(p) => Instance::Smooth(p),
            Problem::Hinge(p) => Instance::NonSmooth(p.with_reference()),
        })
    }

    fn a(&self) -> &bwsgd::matrix::DenseMatrix {
        match self {
            Instance::Smooth(p) => p.a(),
            Instance::NonSmooth(p) => p.a(),
        }
    }

    fn error_column(&self) -> &'static str {
        match self {
            Instance::Smooth(_) => "l2_error",
            Instance::NonSmooth(_) => "objective_gap",
        }
    }
}

/// Everything one configuration's trials share.
struct Prepared {
    config: Config,
    partition: Partition,
    weights: WeightTable,
    /// Smooth step size; unused on the hinge path.
    gamma: f64,
    predicted_iterations: usize,
    precompute_flops: u64,
    budget: usize,
    stride: usize,
}

fn prepare(spec: &ExperimentSpec, instance: &Instance, config: Config) -> Result<Prepared> {
    let a = instance.a();
    let n = a.nrows();
    ensure!(
        n.is_multiple_of(config.batch_size),
        "batch size {} does not divide the {n} rows",
        config.batch_size
    );
    let partition = build_partition(a, config.batch_size, config.strategy, spec.seed)?;
    let d = partition.len();
    let budget = spec
        .max_epochs
        .checked_mul(d)
        .ok_or_else(|| anyhow!("iteration budget overflows"))?;
    let stride = spec.checkpoint_stride.unwrap_or(d).max(1);

    let sampling_backend = config.sampling.backend(spec.pm_epsilon, spec.seed);
    match instance {
        Instance::Smooth(p) => {
            let l_sampling = lipschitz_ls(a, &partition, sampling_backend)?;
            let l_step: Option<LipschitzTable> = if config.step != config.sampling {
                Some(lipschitz_ls(
                    a,
                    &partition,
                    config.step.backend(spec.pm_epsilon, spec.seed),
                )?)
            } else {
                None
            };
            let planner = l_step.as_ref().unwrap_or(&l_sampling);
            let epsilon = spec.target_error * spec.target_error;
            let epsilon0: f64 = p
                .x_star()
                .ok_or_else(|| anyhow!("instance has no reference solution"))?
                .iter()
                .map(|v| v * v)
                .sum();
            let plan = match config.mode {
                ModeArg::Weighted => plan_smooth(p, &partition, planner, epsilon, epsilon0, 1.1)?,
                ModeArg::Uniform => {
                    plan_smooth_uniform(p, &partition, planner, epsilon, epsilon0, 1.1)?
                }
            };
            let weights = match config.mode {
                ModeArg::Weighted => weights_smooth(&l_sampling),
                ModeArg::Uniform => weights_uniform(d)?,
            };
            let precompute_flops =
                l_sampling.precompute_flops() + l_step.as_ref().map_or(0, |l| l.precompute_flops());
            Ok(Prepared {
                config,
                partition,
                weights,
                gamma: plan.gamma,
                predicted_iterations: plan.predicted_iterations,
                precompute_flops,
                budget,
                stride,
            })
        }
        Instance::NonSmooth(p) => {
            let signed = p.signed_matrix();
            let g = lipschitz_hinge(&signed, &partition, p.lambda(), sampling_backend)?;
            let plan = plan_nonsmooth(&g, p.lambda(), spec.target_error, spec.alpha, 1.0)?;
            let weights = match config.mode {
                ModeArg::Weighted => weights_nonsmooth(&g),
                ModeArg::Uniform => weights_uniform(d)?,
            };
            Ok(Prepared {
                config,
                partition,
                weights,
                gamma: 0.0,
                predicted_iterations: plan.predicted_iterations,
                precompute_flops: g.precompute_flops(),
                budget,
                stride,
            })
        }
    }
}

// ── Trial execution ─────────────────────────────────────────────────────────

fn smooth_trial(
    p: &LeastSquaresProblem,
    prep: &Prepared,
    seed: u64,
    trial: u64,
) -> Result<Vec<TraceRecord>> {
    let stream = rng::stream(seed, rng::domain::TRIAL, trial);
    let mut state = RunState::new(p.m(), prep.partition.batch_size(), stream);
    state.flops.add_precompute(prep.precompute_flops);
    let e0 = p.error(&state.x)?;
    state.trace.push(state.flops.record(0, e0));
    for k in 1..=prep.budget {
        step_smooth(&mut state, p, &prep.partition, &prep.weights, prep.gamma)?;
        if k % prep.stride == 0 || k == prep.budget {
            let e = p.error(&state.x)?;
            state.trace.push(state.flops.record(k, e));
        }
    }
    Ok(state.trace)
}

fn nonsmooth_trial(
    p: &HingeLossProblem,
    prep: &Prepared,
    alpha: f64,
    seed: u64,
    trial: u64,
) -> Result<Vec<TraceRecord>> {
    let stream = rng::stream(seed, rng::domain::TRIAL, trial);
    let mut state = AveragedState::new(p.m(), prep.partition.batch_size(), alpha, stream)?;
    state.flops.add_precompute(prep.precompute_flops);
    let gap0 = p.gap(&state.averaged())?;
    state.trace.push(state.flops.record(0, gap0));
    for k in 1..=prep.budget {
        step_nonsmooth(&mut state, p, &prep.partition, &prep.weights, k)?;
        if k % prep.stride == 0 || k == prep.budget {
            let gap = p.gap(&state.averaged())?;
            state.trace.push(state.flops.record(k, gap));
        }
    }
    Ok(state.trace)
}

// ── Summaries ───────────────────────────────────────────────────────────────

/// Per-configuration aggregate over trials.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub config: Config,
    pub trials: u64,
    pub reached: u64,
    pub predicted_iterations: usize,
    pub iterations_to_target_median: Option<f64>,
    pub iterations_to_target_mean: Option<f64>,
    pub flops_shared_to_target_median: Option<f64>,
    pub flops_single_to_target_median: Option<f64>,
    pub speedup_vs_baseline: Option<f64>,
}

/// Median with censored entries treated as infinite; `None` when the
/// median itself lands on a censored entry.
pub(crate) fn median_censored(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().map(|o| o.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    med.is_finite().then_some(med)
}

fn mean_reached(values: &[Option<f64>]) -> Option<f64> {
    let reached: Vec<f64> = values.iter().flatten().copied().collect();
    if reached.is_empty() {
        None
    } else {
        Some(reached.iter().sum::<f64>() / reached.len() as f64)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "config,batch_size,strategy,mode,sampling_estimator,step_estimator,baseline,trials,\
         reached,predicted_iterations,iterations_to_target_median,iterations_to_target_mean,\
         flops_shared_to_target_median,flops_single_to_target_median,speedup_vs_baseline\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.config.id(),
            r.config.batch_size,
            r.config.strategy.label(),
            r.config.mode.label(),
            r.config.sampling.label(),
            r.config.step.label(),
            r.config.baseline,
            r.trials,
            r.reached,
            r.predicted_iterations,
            cell(r.iterations_to_target_median),
            cell(r.iterations_to_target_mean),
            cell(r.flops_shared_to_target_median),
            cell(r.flops_single_to_target_median),
            cell(r.speedup_vs_baseline),
        ));
    }
    out
}

// ── Runner ──────────────────────────────────────────────────────────────────

/// Runs the sweep and writes one trace CSV per (configuration, trial), a
/// summary CSV, and the echoed spec under `out`.
///
/// Trials execute concurrently on the requested worker pool; files are
/// written afterwards in declaration order, so outputs are byte-identical
/// for any worker count.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Vec<SummaryRow>> {
    let mut spec = spec.clone();
    spec.validate()?;
    crate::pad_rows_for(
        spec.generator.family,
        &mut spec.generator.n,
        &spec.batch_sizes,
    )?;
    let spec = &spec;
    prepare_out_dir(&out.to_path_buf(), spec)?;
    let instance = Instance::from_spec(spec)?;
    let smooth = matches!(instance, Instance::Smooth(_));
    let configs = build_configs(spec, smooth);
    let prepared: Vec<Prepared> = configs
        .into_iter()
        .map(|c| prepare(spec, &instance, c).with_context(|| format!("configuration {}", c.id())))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|ci| (0..spec.trials).map(move |t| (ci, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .context("building the worker pool")?;
    let traces: Vec<Vec<TraceRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ci, trial)| {
                let prep = &prepared[ci];
                match &instance {
                    Instance::Smooth(p) => smooth_trial(p, prep, spec.seed, trial),
                    Instance::NonSmooth(p) => {
                        nonsmooth_trial(p, prep, spec.alpha, spec.seed, trial)
                    }
                }
                .with_context(|| format!("configuration {} trial {trial}", prep.config.id()))
            })
            .collect::<Result<_>>()
    })?;

    // Write traces in declaration order and aggregate the summary.
    let column = instance.error_column();
    let mut rows: Vec<SummaryRow> = Vec::with_capacity(prepared.len());
    for (ci, prep) in prepared.iter().enumerate() {
        let mut iters: Vec<Option<f64>> = Vec::new();
        let mut shared: Vec<Option<f64>> = Vec::new();
        let mut single: Vec<Option<f64>> = Vec::new();
        for trial in 0..spec.trials {
            let trace = &traces[ci * spec.trials as usize + trial as usize];
            let name = format!("trace_{}_trial{trial}.csv", prep.config.id());
            std::fs::write(out.join(&name), io::trace_csv(column, trial, trace))
                .with_context(|| format!("writing {name}"))?;
            let hit = first_at_or_below(trace, spec.target_error);
            iters.push(hit.map(|r| r.iteration as f64));
            shared.push(hit.map(|r| r.flops_shared as f64));
            single.push(hit.map(|r| r.flops_single as f64));
        }
        rows.push(SummaryRow {
            config: prep.config,
            trials: spec.trials,
            reached: iters.iter().flatten().count() as u64,
            predicted_iterations: prep.predicted_iterations,
            iterations_to_target_median: median_censored(&iters),
            iterations_to_target_mean: mean_reached(&iters),
            flops_shared_to_target_median: median_censored(&shared),
            flops_single_to_target_median: median_censored(&single),
            speedup_vs_baseline: None,
        });
    }

    let baseline_median = rows
        .iter()
        .find(|r| r.config.baseline)
        .and_then(|r| r.iterations_to_target_median);
    for row in rows.iter_mut() {
        row.speedup_vs_baseline = match (baseline_median, row.iterations_to_target_median) {
            (Some(base), Some(own)) if own > 0.0 => Some(base / own),
            _ => None,
        };
    }

    std::fs::write(out.join("summary.csv"), summary_csv(&rows)).context("writing summary.csv")?;
    println!(
        "wrote {} trace files and summary.csv under {}",
        prepared.len() as u64 * spec.trials,
        out.display()
    );
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FamilyArg;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            generator: GeneratorArgs {
                family: FamilyArg::Gaussian,
                n: 24,
                m: 4,
                noise_norm: 0.0,
                density: 0.2,
                grid_n: 20,
                oversample_f: 3,
                lambda: 0.1,
                svm_separation: 2.0,
            },
            seed: 3,
            batch_sizes: vec![4],
            strategies: vec![StrategyArg::Sequential],
            modes: vec![ModeArg::Weighted],
            estimators: vec![EstimatorArg::Exact],
            opt_step_exact: false,
            pm_epsilon: 0.01,
            trials: 2,
            target_error: 1e-5,
            max_epochs: 40,
            checkpoint_stride: None,
            alpha: 0.5,
            workers: 1,
        }
    }

    #[test]
    fn configs_always_contain_exactly_one_baseline() {
        let mut spec = tiny_spec();
        spec.batch_sizes = vec![1, 4];
        spec.modes = vec![ModeArg::Weighted, ModeArg::Uniform];
        spec.strategies = vec![StrategyArg::Random];
        let configs = build_configs(&spec, true);
        let baselines: Vec<&Config> = configs.iter().filter(|c| c.baseline).collect();
        assert_eq!(baselines.len(), 1);
        assert_eq!(baselines[0].batch_size, 1);
        assert_eq!(baselines[0].mode, ModeArg::Uniform);
        // The baseline coincides with a requested point, so nothing extra
        // was appended.
        assert_eq!(configs.len(), 4);
    }

    #[test]
    fn opt_variants_double_only_the_approximate_estimators() {
        let mut spec = tiny_spec();
        spec.estimators = vec![EstimatorArg::Exact, EstimatorArg::Power];
        spec.opt_step_exact = true;
        let configs = build_configs(&spec, true);
        let ids: Vec<String> = configs.iter().map(|c| c.id()).collect();
        assert!(ids.contains(&"b4_sequential_weighted_power".to_string()));
        assert!(ids.contains(&"b4_sequential_weighted_power_step-exact".to_string()));
        assert!(!ids.iter().any(|i| i.contains("exact_step")));
    }

    #[test]
    fn censored_medians_turn_into_na_cells() {
        assert_eq!(median_censored(&[Some(2.0), None, Some(4.0)]), Some(4.0));
        assert_eq!(median_censored(&[Some(2.0), None, None]), None);
        assert_eq!(mean_reached(&[Some(2.0), None, Some(4.0)]), Some(3.0));
        assert_eq!(mean_reached(&[None, None]), None);
        assert_eq!(cell(None), "NA");
    }

    #[test]
    fn experiment_outputs_are_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        let spec = tiny_spec();
        let rows1 = run_experiment(&spec, &out1).unwrap();
        let mut spec4 = tiny_spec();
        spec4.workers = 4;
        let rows2 = run_experiment(&spec4, &out2).unwrap();
        assert_eq!(rows1.len(), rows2.len());
        // Two configurations (requested + baseline), two trials each.
        for name in [
            "trace_b4_sequential_weighted_exact_trial0.csv",
            "trace_b4_sequential_weighted_exact_trial1.csv",
            "trace_b1_random_uniform_exact_trial0.csv",
            "summary.csv",
        ] {
            let a = std::fs::read(out1.join(name)).unwrap();
            let b = std::fs::read(out2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across worker counts");
        }
        let summary = std::fs::read_to_string(out1.join("summary.csv")).unwrap();
        assert!(summary.starts_with("config,batch_size,strategy,mode,sampling_estimator"));
        assert_eq!(summary.lines().count(), 1 + rows1.len());
    }

    #[test]
    fn unwritable_output_fails_before_any_compute() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        std::fs::write(&file, "x").unwrap();
        // A file where the directory should go: creation fails immediately.
        let err = run_experiment(&tiny_spec(), &file).unwrap_err();
        assert!(err.to_string().contains("creating output directory"));
    }
}
