//! Command-line front end for the batched weighted SGD solver library.
//!
//! Five verbs cover the experiment workflow:
//!
//! * `generate` — draw a synthetic problem instance and write it as text.
//! * `solve` — one solver run with full planning, traced to CSV.
//! * `experiment` — multi-trial sweeps over batch sizes, batching
//!   strategies, sampling modes, and norm estimators; one trace CSV per
//!   (configuration, trial) plus a summary CSV.
//! * `batch-study` — total-flop comparison across batch sizes under the
//!   power-method estimator, reporting where the shared-worker cost is
//!   minimized.
//! * `plots` — self-contained matplotlib scripts rendering the CSVs.
//!
//! Every verb writes all artifacts under `--out`, echoes its resolved
//! settings to `spec.json` there, exits 0 on success, and reports failure
//! as a single `error: …` line on stderr with a nonzero exit code.

pub mod experiment;
pub mod io;
pub mod plots;
pub mod study;

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bwsgd::batching::{partition_random, partition_sequential, Partition};
use bwsgd::config::{SamplingMode, SolveConfig};
use bwsgd::matrix::{row_norms_sq, DenseMatrix, Estimator};
use bwsgd::nonsmooth::run_nonsmooth;
use bwsgd::problems::{generate, Family, GeneratorSpec, Problem};
use bwsgd::smooth::run_smooth;
use bwsgd::weighting::{
    lipschitz_hinge, lipschitz_ls, weights_nonsmooth, weights_smooth, weights_uniform,
    LipschitzTable, WeightTable,
};

// ── Shared flag vocabularies ────────────────────────────────────────────────

/// Problem families the generator can draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Gaussian,
    GaussianVarK2,
    CorrelatedUniformVarK2,
    Orthonormal,
    SparseGaussian,
    Tomography,
    SvmGaussian,
}

impl FamilyArg {
    fn family(self) -> Family {
        match self {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::GaussianVarK2 => Family::GaussianVarK2,
            FamilyArg::CorrelatedUniformVarK2 => Family::CorrelatedUniformVarK2,
            FamilyArg::Orthonormal => Family::Orthonormal,
            FamilyArg::SparseGaussian => Family::SparseGaussian,
            FamilyArg::Tomography => Family::Tomography,
            FamilyArg::SvmGaussian => Family::SvmGaussian,
        }
    }
}

/// How rows are grouped into batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    /// Seeded random permutation chopped into blocks.
    Random,
    /// Decreasing-row-norm order chopped into blocks.
    Sequential,
}

impl StrategyArg {
    pub(crate) fn label(self) -> &'static str {
        match self {
            StrategyArg::Random => "random",
            StrategyArg::Sequential => "sequential",
        }
    }
}

/// How batches are drawn at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Uniform,
    Weighted,
}

impl ModeArg {
    pub(crate) fn mode(self) -> SamplingMode {
        match self {
            ModeArg::Uniform => SamplingMode::Uniform,
            ModeArg::Weighted => SamplingMode::Weighted,
        }
    }

    pub(crate) fn label(self) -> &'static str {
        match self {
            ModeArg::Uniform => "uniform",
            ModeArg::Weighted => "weighted",
        }
    }
}

/// Backend for per-batch squared spectral norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    /// Power iteration run to convergence.
    Exact,
    /// Largest squared row norm of the batch.
    MaxNorm,
    /// Fixed-budget power iteration at accuracy `pm-epsilon`.
    Power,
}

impl EstimatorArg {
    pub(crate) fn backend(self, pm_epsilon: f64, seed: u64) -> Estimator {
        match self {
            EstimatorArg::Exact => Estimator::Exact,
            EstimatorArg::MaxNorm => Estimator::MaxNorm,
            EstimatorArg::Power => Estimator::Power {
                epsilon: pm_epsilon,
                seed,
            },
        }
    }

    pub(crate) fn label(self) -> &'static str {
        match self {
            EstimatorArg::Exact => "exact",
            EstimatorArg::MaxNorm => "max-norm",
            EstimatorArg::Power => "power",
        }
    }
}

/// Generator knobs shared by the `generate`, `solve`, and `experiment`
/// verbs; unused knobs are ignored per family.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GeneratorArgs {
    /// Problem family to draw.
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    /// Rows (ignored by tomography, which uses oversample-f·grid-n²).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Columns (ignored by tomography, which uses grid-n²).
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Exact Euclidean norm of the planted residual (0 = consistent).
    #[arg(long, default_value_t = 0.0)]
    pub noise_norm: f64,
    /// Nonzero fraction for sparse-gaussian.
    #[arg(long, default_value_t = 0.2)]
    pub density: f64,
    /// Grid side for tomography.
    #[arg(long, default_value_t = 20)]
    pub grid_n: usize,
    /// Row oversampling factor for tomography.
    #[arg(long, default_value_t = 3)]
    pub oversample_f: usize,
    /// Regularization weight for svm-gaussian.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Cloud separation for svm-gaussian.
    #[arg(long, default_value_t = 2.0)]
    pub svm_separation: f64,
}

impl GeneratorArgs {
    pub fn to_spec(&self, seed: u64) -> GeneratorSpec {
        let mut spec = GeneratorSpec::new(self.family.family(), self.n, self.m, seed);
        spec.noise_norm = self.noise_norm;
        spec.density = self.density;
        spec.grid_n = self.grid_n;
        spec.oversample_f = self.oversample_f;
        spec.lambda = self.lambda;
        spec.svm_separation = self.svm_separation;
        spec
    }
}

// ── Verbs ───────────────────────────────────────────────────────────────────

#[derive(Debug, Parser)]
#[command(
    name = "bwsgd",
    version,
    about = "Batched weighted SGD experiment harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic instance and write it as text files.
    Generate(GenerateArgs),
    /// Run one planned solve and write its trace.
    Solve(SolveArgs),
    /// Sweep configurations over multiple trials; write traces + summary.
    Experiment(experiment::ExperimentArgs),
    /// Compare total flops to a target accuracy across batch sizes.
    BatchStudy(study::BatchStudyArgs),
    /// Emit matplotlib scripts rendering CSVs in a directory.
    Plots(plots::PlotsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Seed of the generation stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Base seed; combined with --trial into the sampling stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial index within the seed.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Rows per batch.
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    /// Batching strategy.
    #[arg(long, value_enum, default_value_t = StrategyArg::Sequential)]
    pub strategy: StrategyArg,
    /// Batch sampling mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Weighted)]
    pub mode: ModeArg,
    /// Norm estimator driving the sampling weights.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Exact)]
    pub sampling_estimator: EstimatorArg,
    /// Norm estimator driving the step size, when different from the
    /// sampling one.
    #[arg(long, value_enum)]
    pub step_estimator: Option<EstimatorArg>,
    /// Accuracy of the fixed-budget power estimator.
    #[arg(long, default_value_t = 0.01)]
    pub pm_epsilon: f64,
    /// Target L2 error (least squares) or objective gap (hinge).
    #[arg(long, default_value_t = 1e-5)]
    pub target_error: f64,
    /// Iteration budget; 0 = planned count (least squares) or 50
    /// effective epochs (hinge).
    #[arg(long, default_value_t = 0)]
    pub max_iterations: usize,
    /// Checkpoint spacing; defaults to one effective epoch (n/b).
    #[arg(long)]
    pub checkpoint_stride: Option<usize>,
    /// Tail fraction for the hinge suffix average.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Multiplier on measured residual norms in step-size planning.
    #[arg(long, default_value_t = 1.1)]
    pub residual_bound_factor: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one verb to completion.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => run_generate(&args),
        Command::Solve(args) => run_solve(&args),
        Command::Experiment(args) => {
            experiment::run_experiment(&args.to_spec()?, &args.out).map(|_| ())
        }
        Command::BatchStudy(args) => study::run_study(&args.to_spec()?, &args.out).map(|_| ()),
        Command::Plots(args) => plots::emit_plots(&args.dir, args.out.as_deref()).map(|_| ()),
    }
}

// ── generate ────────────────────────────────────────────────────────────────

fn run_generate(args: &GenerateArgs) -> Result<()> {
    prepare_out_dir(&args.out, args)?;
    let problem = generate(&args.generator.to_spec(args.seed))?;
    match &problem {
        Problem::LeastSquares(p) => {
            io::write_matrix(&args.out.join("matrix.txt"), p.a())?;
            io::write_vector(&args.out.join("rhs.txt"), p.rhs())?;
            if let Some(x) = p.x_star() {
                io::write_vector(&args.out.join("x_star.txt"), x)?;
            }
            println!(
                "generated {}x{} least-squares instance under {}",
                p.n(),
                p.m(),
                args.out.display()
            );
        }
        Problem::Hinge(p) => {
            io::write_matrix(&args.out.join("matrix.txt"), p.a())?;
            io::write_vector(&args.out.join("labels.txt"), p.labels())?;
            println!(
                "generated {}x{} hinge instance under {}",
                p.n(),
                p.m(),
                args.out.display()
            );
        }
    }
    Ok(())
}

// ── solve ───────────────────────────────────────────────────────────────────

fn run_solve(args: &SolveArgs) -> Result<()> {
    let mut args = args.clone();
    pad_rows_for(
        args.generator.family,
        &mut args.generator.n,
        &[args.batch_size],
    )?;
    let args = &args;
    prepare_out_dir(&args.out, args)?;
    let problem = generate(&args.generator.to_spec(args.seed))?;
    match problem {
        Problem::LeastSquares(p) => solve_smooth(args, &p),
        Problem::Hinge(p) => solve_nonsmooth(args, &p.with_reference()),
    }
}

fn solve_smooth(args: &SolveArgs, p: &bwsgd::problems::LeastSquaresProblem) -> Result<()> {
    let partition = build_partition(p.a(), args.batch_size, args.strategy, args.seed)?;
    let l = lipschitz_ls(
        p.a(),
        &partition,
        args.sampling_estimator.backend(args.pm_epsilon, args.seed),
    )?;
    let mut config =
        SolveConfig::new(args.target_error * args.target_error, args.seed).with_trial(args.trial);
    config.mode = args.mode.mode();
    config.step_estimator = args
        .step_estimator
        .filter(|s| *s != args.sampling_estimator)
        .map(|s| s.backend(args.pm_epsilon, args.seed));
    config.residual_bound_factor = args.residual_bound_factor;
    config.max_iterations = args.max_iterations;
    config.checkpoint_stride = args.checkpoint_stride;
    let run = run_smooth(p, &partition, &l, &config)?;

    let weights = match args.mode {
        ModeArg::Weighted => weights_smooth(&l),
        ModeArg::Uniform => weights_uniform(partition.len())?,
    };
    write_solve_outputs(args, &partition, &l, &weights)?;
    std::fs::write(
        args.out.join("trace.csv"),
        io::trace_csv("l2_error", args.trial, &run.trace),
    )?;
    io::write_vector(&args.out.join("solution.txt"), &run.x)?;
    report_outcome(run.reached, run.trace.last().map(|r| r.error));
    Ok(())
}

fn solve_nonsmooth(args: &SolveArgs, p: &bwsgd::problems::HingeLossProblem) -> Result<()> {
    let partition = build_partition(p.a(), args.batch_size, args.strategy, args.seed)?;
    let signed = p.signed_matrix();
    let g = lipschitz_hinge(
        &signed,
        &partition,
        p.lambda(),
        args.sampling_estimator.backend(args.pm_epsilon, args.seed),
    )?;
    let mut config = SolveConfig::new(args.target_error, args.seed).with_trial(args.trial);
    config.mode = args.mode.mode();
    config.alpha = args.alpha;
    config.max_iterations = if args.max_iterations == 0 {
        50 * partition.len()
    } else {
        args.max_iterations
    };
    config.checkpoint_stride = args.checkpoint_stride;
    let run = run_nonsmooth(p, &partition, &g, &config)?;

    let weights = match args.mode {
        ModeArg::Weighted => weights_nonsmooth(&g),
        ModeArg::Uniform => weights_uniform(partition.len())?,
    };
    write_solve_outputs(args, &partition, &g, &weights)?;
    std::fs::write(
        args.out.join("trace.csv"),
        io::trace_csv("objective_gap", args.trial, &run.trace),
    )?;
    io::write_vector(&args.out.join("solution.txt"), &run.averaged)?;
    report_outcome(run.reached, run.trace.last().map(|r| r.error));
    Ok(())
}

fn write_solve_outputs(
    args: &SolveArgs,
    partition: &Partition,
    table: &LipschitzTable,
    weights: &WeightTable,
) -> Result<()> {
    io::write_partition(&args.out.join("partition.txt"), partition)?;
    io::write_weight_table(&args.out.join("weights.csv"), table, weights)
}

fn report_outcome(reached: Option<usize>, final_error: Option<f64>) {
    match (reached, final_error) {
        (Some(k), _) => println!("reached target at iteration {k}"),
        (None, Some(e)) => println!("target not reached; final error {}", io::fmt_f64(e)),
        (None, None) => println!("target not reached"),
    }
}

// ── Shared helpers ──────────────────────────────────────────────────────────

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rounds `n` up to the smallest row count every batch size divides.
/// Partitions require exact batches, so generated instances are padded
/// rather than batches left ragged.
pub(crate) fn padded_rows(n: usize, batch_sizes: &[usize]) -> Result<usize> {
    let mut l: usize = 1;
    for &b in batch_sizes {
        ensure!(b >= 1, "batch sizes must be at least 1");
        l = (l / gcd(l, b))
            .checked_mul(b)
            .with_context(|| format!("batch sizes {batch_sizes:?} share no workable row count"))?;
    }
    n.max(1)
        .div_ceil(l)
        .checked_mul(l)
        .with_context(|| format!("padding {n} rows to a multiple of {l} overflows"))
}

/// Pads a row-count knob so every batch size divides it, announcing the
/// change. Tomography row counts come from `oversample-f · grid-n²`, not
/// `n`, so they are left alone and checked at partition time instead.
pub(crate) fn pad_rows_for(family: FamilyArg, n: &mut usize, batch_sizes: &[usize]) -> Result<()> {
    if family == FamilyArg::Tomography {
        return Ok(());
    }
    let padded = padded_rows(*n, batch_sizes)?;
    if padded != *n {
        println!("padded n from {n} to {padded} so every batch size divides it");
        *n = padded;
    }
    Ok(())
}

/// Creates the output directory and echoes the resolved settings to
/// `spec.json` before any computation starts, so an unwritable target
/// fails the run immediately.
pub(crate) fn prepare_out_dir<S: Serialize>(out: &PathBuf, spec: &S) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let text = serde_json::to_string_pretty(spec).context("encoding spec.json")?;
    std::fs::write(out.join("spec.json"), text + "\n")
        .with_context(|| format!("writing spec.json under {}", out.display()))?;
    Ok(())
}

pub(crate) fn build_partition(
    a: &DenseMatrix,
    b: usize,
    strategy: StrategyArg,
    seed: u64,
) -> Result<Partition> {
    let p = match strategy {
        StrategyArg::Random => partition_random(a.nrows(), b, seed)?,
        StrategyArg::Sequential => partition_sequential(&row_norms_sq(a), b)?,
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn kebab_case_flags_parse_into_the_expected_variants() {
        let cli = Cli::try_parse_from([
            "bwsgd",
            "solve",
            "--family",
            "gaussian-var-k2",
            "--strategy",
            "sequential",
            "--mode",
            "uniform",
            "--sampling-estimator",
            "max-norm",
            "--target-error",
            "1e-3",
            "--out",
            "/tmp/x",
        ])
        .unwrap();
        match cli.command {
            Command::Solve(s) => {
                assert_eq!(s.generator.family, FamilyArg::GaussianVarK2);
                assert_eq!(s.strategy, StrategyArg::Sequential);
                assert_eq!(s.mode, ModeArg::Uniform);
                assert_eq!(s.sampling_estimator, EstimatorArg::MaxNorm);
                assert_eq!(s.target_error, 1e-3);
            }
            _ => panic!("parsed the wrong verb"),
        }
    }

    #[test]
    fn unknown_family_is_rejected_at_parse_time() {
        let err =
            Cli::try_parse_from(["bwsgd", "generate", "--family", "cauchy", "--out", "/tmp/x"]);
        assert!(err.is_err());
    }

    #[test]
    fn row_padding_rounds_up_to_the_joint_batch_multiple() {
        assert_eq!(padded_rows(1000, &[1, 2, 4, 8, 16, 32]).unwrap(), 1024);
        assert_eq!(padded_rows(320, &[1, 2, 4, 8, 16, 32]).unwrap(), 320);
        assert_eq!(padded_rows(7, &[3, 5]).unwrap(), 15);
        assert_eq!(padded_rows(1, &[6, 4]).unwrap(), 12);
        assert!(padded_rows(10, &[0]).is_err());
        assert!(padded_rows(10, &[usize::MAX, usize::MAX - 1]).is_err());
    }

    #[test]
    fn tomography_row_counts_are_never_padded() {
        let mut n = 1200;
        pad_rows_for(FamilyArg::Tomography, &mut n, &[32]).unwrap();
        assert_eq!(n, 1200);
        let mut n = 1000;
        pad_rows_for(FamilyArg::Gaussian, &mut n, &[32]).unwrap();
        assert_eq!(n, 1024);
    }
}
