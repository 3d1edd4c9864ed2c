//! Text formats for problems, partitions, tables, traces, and summaries.
//!
//! Everything is plain text so runs can be diffed and cross-checked with
//! external tools: matrices as a `n m` header plus space-separated rows,
//! vectors one entry per line, partitions one batch of row indices per
//! line, and CSV for tables, traces, and summaries. Floating-point values
//! are printed with 17 significant digits so that re-parsing reproduces
//! the exact bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use bwsgd::batching::Partition;
use bwsgd::matrix::DenseMatrix;
use bwsgd::trace::TraceRecord;
use bwsgd::weighting::{LipschitzTable, WeightTable};

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `n m` followed by one space-separated row per line.
pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes one entry per line.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::new();
    for &x in v {
        let _ = writeln!(out, "{}", fmt_f64(x));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes one batch per line as space-separated row indices.
pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    let mut out = String::new();
    for batch in p.batches() {
        let ids: Vec<String> = batch.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(" "));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes the per-batch bound values and sampling probabilities as CSV.
pub fn write_weight_table(path: &Path, l: &LipschitzTable, w: &WeightTable) -> Result<()> {
    let mut out = String::from("batch_index,value,probability\n");
    for (i, (&v, &p)) in l.values().iter().zip(w.probabilities()).enumerate() {
        let _ = writeln!(out, "{i},{},{}", fmt_f64(v), fmt_f64(p));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Renders one trial's checkpoints as a trace CSV.
///
/// `error_column` names the third column: `l2_error` for least-squares
/// runs, `objective_gap` for hinge runs. Flop totals are exact integer
/// multiply-add counts.
pub fn trace_csv(error_column: &str, trial: u64, trace: &[TraceRecord]) -> String {
    let mut out = format!("trial,iteration,{error_column},flops_shared,flops_single\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{trial},{},{},{},{}",
            r.iteration,
            fmt_f64(r.error),
            r.flops_shared,
            r.flops_single
        );
    }
    out
}

/// Reads the header (first line) of a CSV file.
pub fn read_csv_header(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    Ok(first.split(',').map(|c| c.trim().to_string()).collect())
}
