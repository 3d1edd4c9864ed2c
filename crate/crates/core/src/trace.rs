//! Convergence traces and the multiply-add cost model.
//!
//! Every run emits a sequence of [`TraceRecord`]s, one per checkpoint,
//! carrying the monitored error together with two cumulative flop totals:
//!
//! * **single** — all multiply-adds executed on one node, undivided;
//! * **shared** — the same work priced for `b` cooperating workers: the
//!   row-parallel part of each iteration and the per-batch estimator
//!   precomputation are divided by `b`, while the sequential iterate
//!   update is charged in full.
//!
//! Only multiply-adds are counted (a dot product of length `m` costs `m`,
//! a scaled vector accumulation costs `m`, one Gram power-iteration step
//! costs `b²`). Monitoring work — reference distances, objective values,
//! averaging bookkeeping — is free: it exists for the experimenter, not
//! for the solver.

use alloc::vec::Vec;

/// One checkpoint of a solver run.
///
/// `error` stores whatever metric the producing run monitors: distance to
/// the reference solution for the least-squares solver, objective gap of
/// the suffix average for the hinge solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Iteration at which the checkpoint was taken (0 = before any step).
    pub iteration: usize,
    /// Monitored error at this iteration.
    pub error: f64,
    /// Cumulative multiply-adds under the shared-worker model.
    pub flops_shared: u64,
    /// Cumulative multiply-adds on a single node.
    pub flops_single: u64,
}

/// Cumulative multiply-add counters split by how the work parallelizes.
///
/// The split matters because the two published totals price the classes
/// differently: row-parallel work and precomputation amortize over `b`
/// workers, the sequential iterate update does not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopModel {
    batch_size: usize,
    /// Per-row dot products inside sampled batches (parallel across rows).
    dot_flops: u64,
    /// Per-row scaled accumulations into the batch direction (parallel).
    batch_update_flops: u64,
    /// Sequential whole-iterate updates.
    iterate_update_flops: u64,
    /// One-off batch-norm estimation ahead of the run (parallel across
    /// batches).
    precompute_flops: u64,
}

impl FlopModel {
    /// Fresh counters for a run over batches of `batch_size` rows.
    pub fn new(batch_size: usize) -> Self {
        FlopModel {
            batch_size: batch_size.max(1),
            dot_flops: 0,
            batch_update_flops: 0,
            iterate_update_flops: 0,
            precompute_flops: 0,
        }
    }

    /// Batch size the shared total divides by.
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Charge row dot products (parallel class).
    pub fn add_dots(&mut self, flops: u64) {
        self.dot_flops += flops;
    }

    /// Charge scaled row accumulations (parallel class).
    pub fn add_batch_updates(&mut self, flops: u64) {
        self.batch_update_flops += flops;
    }

    /// Charge sequential iterate updates.
    pub fn add_iterate_updates(&mut self, flops: u64) {
        self.iterate_update_flops += flops;
    }

    /// Charge estimator precomputation (parallel class).
    pub fn add_precompute(&mut self, flops: u64) {
        self.precompute_flops += flops;
    }

    /// Row-parallel per-iteration work charged so far.
    pub fn per_iteration_parallel(&self) -> u64 {
        self.dot_flops + self.batch_update_flops
    }

    /// Sequential per-iteration work charged so far.
    pub fn per_iteration_sequential(&self) -> u64 {
        self.iterate_update_flops
    }

    /// Estimator precomputation charged so far.
    pub fn precompute(&self) -> u64 {
        self.precompute_flops
    }

    /// Total multiply-adds on a single node.
    pub fn single(&self) -> u64 {
        self.dot_flops + self.batch_update_flops + self.iterate_update_flops + self.precompute_flops
    }

    /// Total multiply-adds with the parallel classes divided by the batch
    /// size (rounding up, so a nonzero cost never vanishes).
    pub fn shared(&self) -> u64 {
        let b = self.batch_size as u64;
        div_ceil(self.dot_flops + self.batch_update_flops, b)
            + self.iterate_update_flops
            + div_ceil(self.precompute_flops, b)
    }

    /// Checkpoint record at `iteration` with monitored `error`.
    pub fn record(&self, iteration: usize, error: f64) -> TraceRecord {
        TraceRecord {
            iteration,
            error,
            flops_shared: self.shared(),
            flops_single: self.single(),
        }
    }
}

fn div_ceil(value: u64, divisor: u64) -> u64 {
    value / divisor + u64::from(!value.is_multiple_of(divisor))
}

/// First record whose error is at or below `target`, if any.
pub fn first_at_or_below(trace: &[TraceRecord], target: f64) -> Option<&TraceRecord> {
    trace.iter().find(|r| r.error <= target)
}

/// Convenience: the trace's error sequence.
pub fn errors(trace: &[TraceRecord]) -> Vec<f64> {
    trace.iter().map(|r| r.error).collect()
}
