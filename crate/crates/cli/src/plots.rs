//! Plot-script emission.
//!
//! `plots` never draws anything itself: it scans a results directory for
//! trace CSVs (and an optional summary CSV), validates their headers, and
//! writes self-contained matplotlib scripts that render them. The scripts
//! reference the CSVs relative to their own location, so a results
//! directory can be archived and rendered elsewhere.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use crate::io::read_csv_header;

#[derive(Debug, Args, Serialize)]
pub struct PlotsArgs {
    /// Directory holding trace_*.csv (and optionally summary.csv).
    #[arg(long)]
    pub dir: PathBuf,
    /// Where to write the scripts (defaults to --dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What `plots` did, for callers that want to assert on it.
#[derive(Debug, PartialEq, Eq)]
pub enum PlotsOutcome {
    /// The directory held no trace CSVs; nothing was written.
    NoTraces,
    /// Scripts were written at the returned paths.
    Scripts(Vec<PathBuf>),
}

const REQUIRED_TRACE_COLUMNS: [&str; 4] = ["trial", "iteration", "flops_shared", "flops_single"];
const ERROR_COLUMNS: [&str; 2] = ["l2_error", "objective_gap"];
const REQUIRED_SUMMARY_COLUMNS: [&str; 3] = [
    "config",
    "iterations_to_target_median",
    "speedup_vs_baseline",
];

// ── Directory scanning ──────────────────────────────────────────────────────

fn trace_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in
        std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?
    {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.starts_with("trace_") && name.ends_with(".csv") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Strips `trace_` / `_trial<t>.csv` to recover the configuration id;
/// files without a trial tag group under their full stem.
fn config_of(name: &str) -> String {
    let stem = name
        .strip_prefix("trace_")
        .unwrap_or(name)
        .strip_suffix(".csv")
        .unwrap_or(name);
    match stem.rfind("_trial") {
        Some(pos) if stem[pos + 6..].chars().all(|c| c.is_ascii_digit()) => stem[..pos].to_string(),
        _ => stem.to_string(),
    }
}

fn validate_trace_header(dir: &Path, name: &str) -> Result<&'static str> {
    let header = read_csv_header(&dir.join(name))?;
    for col in REQUIRED_TRACE_COLUMNS {
        if !header.iter().any(|h| h == col) {
            bail!("{name} is missing column '{col}'");
        }
    }
    ERROR_COLUMNS
        .into_iter()
        .find(|c| header.iter().any(|h| h == c))
        .ok_or_else(|| anyhow::anyhow!("{name} is missing column 'l2_error' (or 'objective_gap')"))
}

fn validate_summary_header(dir: &Path) -> Result<()> {
    let header = read_csv_header(&dir.join("summary.csv"))?;
    for col in REQUIRED_SUMMARY_COLUMNS {
        if !header.iter().any(|h| h == col) {
            bail!("summary.csv is missing column '{col}'");
        }
    }
    Ok(())
}

/// Relative path from `from` to `to`, both taken as directories. Falls
/// back to the absolute target when the two share no walkable prefix.
fn relative_dir(from: &Path, to: &Path) -> PathBuf {
    let from: Vec<Component> = from.components().collect();
    let to_parts: Vec<Component> = to.components().collect();
    let shared = from
        .iter()
        .zip(to_parts.iter())
        .take_while(|(a, b)| a == b)
        .count();
    if shared == 0 && from.first() != to_parts.first() {
        return to.to_path_buf();
    }
    let mut rel = PathBuf::new();
    for _ in shared..from.len() {
        rel.push("..");
    }
    for part in &to_parts[shared..] {
        rel.push(part.as_os_str());
    }
    if rel.as_os_str().is_empty() {
        rel.push(".");
    }
    rel
}

// ── Script templates ────────────────────────────────────────────────────────

const CURVES_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Median error-vs-iteration curves (log y), one line per configuration."""
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.normpath(os.path.join(HERE, "__DATA_DIR__"))
GROUPS = __GROUPS__


def median(values):
    s = sorted(values)
    n = len(s)
    return s[n // 2] if n % 2 else 0.5 * (s[n // 2 - 1] + s[n // 2])


fig, ax = plt.subplots(figsize=(8.0, 5.0))
for config in sorted(GROUPS):
    meta = GROUPS[config]
    per_iteration = defaultdict(list)
    for name in meta["files"]:
        with open(os.path.join(DATA_DIR, name), newline="") as fh:
            for row in csv.DictReader(fh):
                per_iteration[int(row["iteration"])].append(float(row[meta["column"]]))
    iterations = sorted(per_iteration)
    ax.plot(iterations, [median(per_iteration[k]) for k in iterations], label=config)
ax.set_yscale("log")
ax.set_xlabel("iteration")
ax.set_ylabel("median error at checkpoint")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "curves.png"), dpi=150)
print("wrote curves.png")
"#;

const RATIOS_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Median-iteration speedup over the b=1 uniform baseline, per configuration."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
SUMMARY = os.path.normpath(os.path.join(HERE, "__DATA_DIR__", "summary.csv"))

labels = []
values = []
with open(SUMMARY, newline="") as fh:
    for row in csv.DictReader(fh):
        if row["speedup_vs_baseline"] not in ("", "NA"):
            labels.append(row["config"])
            values.append(float(row["speedup_vs_baseline"]))

fig, ax = plt.subplots(figsize=(8.0, 4.0))
ax.bar(range(len(values)), values)
ax.axhline(1.0, color="gray", linewidth=0.8)
ax.set_xticks(range(len(values)))
ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
ax.set_ylabel("speedup vs b=1 uniform")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "ratios.png"), dpi=150)
print("wrote ratios.png")
"#;

// ── Emission ────────────────────────────────────────────────────────────────

/// Scans `dir`, validates headers, and writes `plot_curves.py` (and
/// `plot_ratios.py` when a summary is present) under `out` (default:
/// `dir`). An empty directory is reported, not an error.
pub fn emit_plots(dir: &Path, out: Option<&Path>) -> Result<PlotsOutcome> {
    let out = out.unwrap_or(dir);
    let traces = trace_files(dir)?;
    if traces.is_empty() {
        println!(
            "no trace CSVs found under {}; nothing to plot",
            dir.display()
        );
        return Ok(PlotsOutcome::NoTraces);
    }

    // config id → (error column, member files)
    let mut groups: BTreeMap<String, (&'static str, Vec<String>)> = BTreeMap::new();
    for name in &traces {
        let column = validate_trace_header(dir, name)?;
        let entry = groups
            .entry(config_of(name))
            .or_insert_with(|| (column, Vec::new()));
        if entry.0 != column {
            bail!(
                "configuration {} mixes '{}' and '{column}' traces",
                config_of(name),
                entry.0
            );
        }
        entry.1.push(name.clone());
    }

    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let data_dir = relative_dir(out, dir);
    // JSON doubles as a Python literal for strings, lists, and dicts.
    let groups_json = serde_json::to_string_pretty(
        &groups
            .iter()
            .map(|(config, (column, files))| {
                (
                    config.clone(),
                    serde_json::json!({ "column": column, "files": files }),
                )
            })
            .collect::<BTreeMap<String, serde_json::Value>>(),
    )
    .context("encoding trace groups")?;

    let mut written = Vec::new();
    let curves = CURVES_TEMPLATE
        .replace("__DATA_DIR__", &data_dir.to_string_lossy())
        .replace("__GROUPS__", &groups_json);
    let curves_path = out.join("plot_curves.py");
    std::fs::write(&curves_path, curves).context("writing plot_curves.py")?;
    written.push(curves_path);

    if dir.join("summary.csv").is_file() {
        validate_summary_header(dir)?;
        let ratios = RATIOS_TEMPLATE.replace("__DATA_DIR__", &data_dir.to_string_lossy());
        let ratios_path = out.join("plot_ratios.py");
        std::fs::write(&ratios_path, ratios).context("writing plot_ratios.py")?;
        written.push(ratios_path);
    }

    println!(
        "wrote {} script(s) under {} covering {} configuration(s)",
        written.len(),
        out.display(),
        groups.len()
    );
    Ok(PlotsOutcome::Scripts(written))
}
