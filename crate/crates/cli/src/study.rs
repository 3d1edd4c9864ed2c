//! Batch-size cost study.
//!
//! For a grid of batch sizes, the study repeatedly draws a fresh
//! least-squares instance, runs one planned weighted solve per batch size
//! to a modest accuracy target, and records the total flops charged at the
//! first checkpoint that meets the target. Under the shared-memory cost
//! model the norm precompute grows with the batch size (the power method
//! spends `⌈100·ln(100·b)⌉` passes over each `b×m` batch) while the
//! per-iteration cost shrinks, so the cheapest batch size sits strictly
//! inside the grid when the target is loose enough for the precompute to
//! matter. The study reports the per-seed argmin distribution under both
//! the shared and the one-row-per-flop serial cost model.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use bwsgd::problems::{generate, GeneratorSpec, Problem};
use bwsgd::rng;
use bwsgd::smooth::{plan_smooth, plan_smooth_uniform, step_smooth, RunState};
use bwsgd::weighting::{lipschitz_ls, weights_smooth, weights_uniform};

use crate::{build_partition, prepare_out_dir, EstimatorArg, FamilyArg, ModeArg, StrategyArg};

// ── Specification ───────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct BatchStudyArgs {
    /// Least-squares family to study.
    #[arg(long, value_enum, default_value_t = FamilyArg::GaussianVarK2)]
    pub family: FamilyArg,
    /// Rows of each drawn instance.
    #[arg(long, default_value_t = 320)]
    pub n: usize,
    /// Columns of each drawn instance.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Exact Euclidean norm of the planted residual (0 = consistent).
    #[arg(long, default_value_t = 0.0)]
    pub noise_norm: f64,
    /// Batch sizes to compare (comma-separated divisors of n).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8, 16, 32])]
    pub batch_sizes: Vec<usize>,
    /// Batching strategy shared by all arms.
    #[arg(long, value_enum, default_value_t = StrategyArg::Sequential)]
    pub strategy: StrategyArg,
    /// Sampling mode shared by all arms.
    #[arg(long, value_enum, default_value_t = ModeArg::Weighted)]
    pub mode: ModeArg,
    /// Accuracy of the fixed-budget power estimator used for the norms.
    #[arg(long, default_value_t = 0.01)]
    pub pm_epsilon: f64,
    /// Target L2 error; the default sits where the precompute and the
    /// iterations trade off visibly.
    #[arg(long, default_value_t = 0.1)]
    pub target_error: f64,
    /// Fresh instances to aggregate over.
    #[arg(long, default_value_t = 40)]
    pub seeds: u64,
    /// Base seed; instance s uses seed + s.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flat iteration cap per run, generous enough that no arm is censored;
    /// kept identical across batch sizes so the comparison stays fair.
    #[arg(long, default_value_t = 600_000)]
    pub max_iterations: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl BatchStudyArgs {
    pub fn to_spec(&self) -> Result<StudySpec> {
        let spec = StudySpec {
            family: self.family,
            n: self.n,
            m: self.m,
            noise_norm: self.noise_norm,
            batch_sizes: self.batch_sizes.clone(),
            strategy: self.strategy,
            mode: self.mode,
            pm_epsilon: self.pm_epsilon,
            target_error: self.target_error,
            seeds: self.seeds,
            seed: self.seed,
            max_iterations: self.max_iterations,
            workers: self.workers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Resolved study settings, echoed verbatim to `spec.json`.
#[derive(Debug, Clone, Serialize)]
pub struct StudySpec {
    pub family: FamilyArg,
    pub n: usize,
    pub m: usize,
    pub noise_norm: f64,
    pub batch_sizes: Vec<usize>,
    pub strategy: StrategyArg,
    pub mode: ModeArg,
    pub pm_epsilon: f64,
    pub target_error: f64,
    pub seeds: u64,
    pub seed: u64,
    pub max_iterations: usize,
    pub workers: usize,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.family == FamilyArg::SvmGaussian {
            bail!("batch-study compares least-squares families only");
        }
        ensure!(
            !self.batch_sizes.is_empty(),
            "batch-sizes must not be empty"
        );
        ensure!(
            self.batch_sizes.iter().all(|&b| b >= 1),
            "batch sizes must be at least 1"
        );
        ensure!(self.seeds >= 1, "seeds must be at least 1");
        ensure!(
            self.target_error.is_finite() && self.target_error > 0.0,
            "target-error must be positive"
        );
        ensure!(
            self.pm_epsilon > 0.0 && self.pm_epsilon < 1.0,
            "pm-epsilon must lie in (0, 1)"
        );
        ensure!(
            self.max_iterations >= 1,
            "max-iterations must be at least 1"
        );
        Ok(())
    }
}

// ── Rows and report ─────────────────────────────────────────────────────────

/// One (instance, batch size) run.
#[derive(Debug, Clone, Copy)]
pub struct StudyRow {
    pub seed_index: u64,
    pub batch_size: usize,
    pub reached: bool,
    pub iterations: usize,
    pub flops_shared: u64,
    pub flops_single: u64,
}

/// Aggregate result returned for in-process inspection.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    /// batch size → number of seeds whose shared-model flop total was
    /// minimized there; seeds with any censored arm are excluded.
    pub argmin_shared: BTreeMap<usize, u64>,
    /// Same under the serial cost model.
    pub argmin_single: BTreeMap<usize, u64>,
    /// Seeds excluded from the argmin counts because an arm was censored.
    pub censored_seeds: u64,
}

fn argmin_over(rows: &[StudyRow], pick: impl Fn(&StudyRow) -> u64) -> Option<usize> {
    if rows.iter().any(|r| !r.reached) {
        return None;
    }
    rows.iter()
        .min_by_key(|r| (pick(r), r.batch_size))
        .map(|r| r.batch_size)
}

fn distribution_line(label: &str, dist: &BTreeMap<usize, u64>) -> String {
    let cells: Vec<String> = dist.iter().map(|(b, c)| format!("b={b}:{c}")).collect();
    format!("{label} argmin distribution: {}", cells.join(" "))
}

// ── Runner ──────────────────────────────────────────────────────────────────

fn run_seed(spec: &StudySpec, s: u64) -> Result<Vec<StudyRow>> {
    let instance_seed = spec.seed.wrapping_add(s);
    let mut gspec = GeneratorSpec::new(spec.family.family(), spec.n, spec.m, instance_seed);
    gspec.noise_norm = spec.noise_norm;
    let p = match generate(&gspec)? {
        Problem::LeastSquares(p) => p,
        Problem::Hinge(_) => bail!("batch-study drew a non-least-squares instance"),
    };
    let epsilon = spec.target_error * spec.target_error;
    let epsilon0: f64 = p
        .x_star()
        .context("instance has no reference solution")?
        .iter()
        .map(|v| v * v)
        .sum();

    let mut rows = Vec::with_capacity(spec.batch_sizes.len());
    for &b in &spec.batch_sizes {
        let partition = build_partition(p.a(), b, spec.strategy, instance_seed)?;
        let d = partition.len();
        let l = lipschitz_ls(
            p.a(),
            &partition,
            EstimatorArg::Power.backend(spec.pm_epsilon, instance_seed),
        )?;
        let (plan, weights) = match spec.mode {
            ModeArg::Weighted => (
                plan_smooth(&p, &partition, &l, epsilon, epsilon0, 1.1)?,
                weights_smooth(&l),
            ),
            ModeArg::Uniform => (
                plan_smooth_uniform(&p, &partition, &l, epsilon, epsilon0, 1.1)?,
                weights_uniform(d)?,
            ),
        };
        let stream = rng::stream(instance_seed, rng::domain::TRIAL, 0);
        let mut state = RunState::new(p.m(), b, stream);
        state.flops.add_precompute(l.precompute_flops());

        let mut row = StudyRow {
            seed_index: s,
            batch_size: b,
            reached: false,
            iterations: spec.max_iterations,
            flops_shared: 0,
            flops_single: 0,
        };
        let initial = p.error(&state.x)?;
        if initial <= spec.target_error {
            let rec = state.flops.record(0, initial);
            row = StudyRow {
                reached: true,
                iterations: 0,
                flops_shared: rec.flops_shared,
                flops_single: rec.flops_single,
                ..row
            };
        } else {
            for k in 1..=spec.max_iterations {
                step_smooth(&mut state, &p, &partition, &weights, plan.gamma)?;
                if k % d == 0 || k == spec.max_iterations {
                    let e = p.error(&state.x)?;
                    let rec = state.flops.record(k, e);
                    if e <= spec.target_error {
                        row = StudyRow {
                            reached: true,
                            iterations: k,
                            flops_shared: rec.flops_shared,
                            flops_single: rec.flops_single,
                            ..row
                        };
                        break;
                    }
                    if k == spec.max_iterations {
                        row.flops_shared = rec.flops_shared;
                        row.flops_single = rec.flops_single;
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the study and writes `study.csv`, `argmin.csv`, and the echoed
/// spec under `out`; returns the aggregate for in-process inspection.
pub fn run_study(spec: &StudySpec, out: &Path) -> Result<StudyReport> {
    let mut spec = spec.clone();
    spec.validate()?;
    crate::pad_rows_for(spec.family, &mut spec.n, &spec.batch_sizes)?;
    let spec = &spec;
    prepare_out_dir(&out.to_path_buf(), spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .context("building the worker pool")?;
    let per_seed: Vec<Vec<StudyRow>> = pool.install(|| {
        (0..spec.seeds)
            .into_par_iter()
            .map(|s| run_seed(spec, s).with_context(|| format!("seed index {s}")))
            .collect::<Result<_>>()
    })?;

    let mut argmin_shared: BTreeMap<usize, u64> = BTreeMap::new();
    let mut argmin_single: BTreeMap<usize, u64> = BTreeMap::new();
    let mut censored_seeds = 0u64;
    let mut csv =
        String::from("seed,batch_size,reached,iterations_to_target,flops_shared,flops_single\n");
    for rows in &per_seed {
        for r in rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.seed_index, r.batch_size, r.reached, r.iterations, r.flops_shared, r.flops_single,
            ));
        }
        match (
            argmin_over(rows, |r| r.flops_shared),
            argmin_over(rows, |r| r.flops_single),
        ) {
            (Some(bs), Some(bi)) => {
                *argmin_shared.entry(bs).or_insert(0) += 1;
                *argmin_single.entry(bi).or_insert(0) += 1;
            }
            _ => censored_seeds += 1,
        }
    }
    std::fs::write(out.join("study.csv"), csv).context("writing study.csv")?;

    let mut argmin_csv = String::from("model,batch_size,seed_count\n");
    for (b, c) in &argmin_shared {
        argmin_csv.push_str(&format!("shared,{b},{c}\n"));
    }
    for (b, c) in &argmin_single {
        argmin_csv.push_str(&format!("single,{b},{c}\n"));
    }
    std::fs::write(out.join("argmin.csv"), argmin_csv).context("writing argmin.csv")?;

    println!("{}", distribution_line("shared-model", &argmin_shared));
    println!("{}", distribution_line("single-model", &argmin_single));
    if censored_seeds > 0 {
        println!("{censored_seeds} seed(s) had censored arms and were excluded");
    }

    Ok(StudyReport {
        rows: per_seed.into_iter().flatten().collect(),
        argmin_shared,
        argmin_single,
        censored_seeds,
    })
}
