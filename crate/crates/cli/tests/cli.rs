//! Subprocess checks of the command-line contract: exit codes, the
//! single-line error format, the spec.json echo, and the on-disk layout of
//! each verb's outputs.

use std::path::Path;
use std::process::{Command, Output};

fn bwsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwsgd"))
        .args(args)
        .output()
        .expect("binary must spawn")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn failures_exit_nonzero_with_a_single_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let run = bwsgd(&[
        "solve",
        "--n",
        "10",
        "--m",
        "2",
        "--batch-size",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    let err = stderr_of(&run);
    assert!(err.starts_with("error: "), "stderr was: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "stderr was: {err}");
}

#[test]
fn unwritable_output_directory_fails_before_any_compute() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("occupied");
    std::fs::write(&blocker, "not a directory").unwrap();
    let run = bwsgd(&[
        "experiment",
        "--n",
        "64",
        "--m",
        "8",
        "--trials",
        "1",
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    assert!(
        stderr_of(&run).contains("creating output directory"),
        "stderr was: {}",
        stderr_of(&run)
    );
}

#[test]
fn spec_is_echoed_as_json_before_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let run = bwsgd(&[
        "generate",
        "--family",
        "sparse-gaussian",
        "--n",
        "30",
        "--m",
        "6",
        "--density",
        "0.5",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let spec = std::fs::read_to_string(out.join("spec.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&spec).unwrap();
    assert_eq!(parsed["generator"]["family"], "sparse-gaussian");
    assert_eq!(parsed["generator"]["density"], 0.5);
    assert_eq!(parsed["seed"], 4);
}

fn assert_line_count(path: &Path, expected: usize) {
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(
        text.lines().count(),
        expected,
        "unexpected shape of {}",
        path.display()
    );
}

#[test]
fn generate_writes_the_documented_text_layout() {
    let dir = tempfile::tempdir().unwrap();
    let ls = dir.path().join("ls");
    let run = bwsgd(&[
        "generate",
        "--n",
        "24",
        "--m",
        "5",
        "--noise-norm",
        "0.25",
        "--out",
        ls.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    // Header plus one line per row; solution has one line per column.
    assert_line_count(&ls.join("matrix.txt"), 25);
    assert_line_count(&ls.join("rhs.txt"), 24);
    assert_line_count(&ls.join("x_star.txt"), 5);
    let header = std::fs::read_to_string(ls.join("matrix.txt"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "24 5");

    let svm = dir.path().join("svm");
    let run = bwsgd(&[
        "generate",
        "--family",
        "svm-gaussian",
        "--n",
        "20",
        "--m",
        "4",
        "--out",
        svm.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    assert_line_count(&svm.join("labels.txt"), 20);
    assert!(!svm.join("x_star.txt").exists());
}

#[test]
fn solve_writes_trace_solution_partition_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve");
    let run = bwsgd(&[
        "solve",
        "--n",
        "60",
        "--m",
        "5",
        "--batch-size",
        "6",
        "--seed",
        "2",
        "--target-error",
        "1e-4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("trial,iteration,l2_error,flops_shared,flops_single\n"));
    assert_line_count(&out.join("solution.txt"), 5);
    assert_line_count(&out.join("partition.txt"), 10);
    let weights = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    assert!(weights.starts_with("batch_index,value,probability\n"));
    assert_line_count(&out.join("weights.csv"), 11);
    // The solve stops at its first checkpoint at or below the target.
    let last = trace.lines().last().unwrap();
    let error: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(error <= 1e-4, "final trace error {error} above target");
}

#[test]
fn solve_pads_rows_up_to_a_batch_multiple_and_says_so() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("padded");
    let run = bwsgd(&[
        "solve",
        "--n",
        "10",
        "--m",
        "2",
        "--batch-size",
        "3",
        "--target-error",
        "1e-3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        stdout.contains("padded n from 10 to 12"),
        "stdout was: {stdout}"
    );
    // 12 rows in 4 batches of 3; the echoed spec records the padded size.
    assert_line_count(&out.join("partition.txt"), 4);
    let spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["generator"]["n"], 12);
}

#[test]
fn hinge_solves_report_the_objective_gap_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("svm");
    let run = bwsgd(&[
        "solve",
        "--family",
        "svm-gaussian",
        "--n",
        "40",
        "--m",
        "4",
        "--batch-size",
        "4",
        "--target-error",
        "5e-2",
        "--max-iterations",
        "4000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("trial,iteration,objective_gap,flops_shared,flops_single\n"));
}

#[test]
fn plots_on_an_empty_directory_succeeds_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let run = bwsgd(&["plots", "--dir", dir.path().to_str().unwrap()]);
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("no trace CSVs"), "stdout was: {stdout}");
}

#[test]
fn plots_rejects_a_trace_missing_its_error_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("trace_b1_random_uniform_exact_trial0.csv"),
        "trial,iteration,flops_shared,flops_single\n0,0,1,1\n",
    )
    .unwrap();
    let run = bwsgd(&["plots", "--dir", dir.path().to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(
        stderr_of(&run).contains("l2_error"),
        "stderr was: {}",
        stderr_of(&run)
    );
}
