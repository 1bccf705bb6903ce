use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use wdnorm::oracle::ReplicateReport;

fn wdnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdnorm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn worked_matrix(dir: &Path, first: bool) -> PathBuf {
    let r = 2f64.sqrt();
    let (a, b) = if first { (5.0, 12.0) } else { (12.0, 5.0) };
    let path = dir.join(if first { "ex2a.csv" } else { "ex2b.csv" });
    let text = format!(
        "{:?},0,{:?}\n{:?},{:?},0\n",
        r * a / 13.0,
        r,
        r * b / 13.0,
        r
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn small_design(dir: &Path) -> PathBuf {
    let path = dir.join("x.csv");
    std::fs::write(
        &path,
        "1,0.2,0\n0,1,0.3\n0.5,0,1\n1,1,0\n0,0.4,1\n-1,0.5,0.2\n",
    )
    .unwrap();
    path
}

#[test]
fn eigenvalue_reproduces_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let m = worked_matrix(dir.path(), true);
    let out = wdnorm(&["eigenvalue", "--matrix", m.to_str().unwrap(), "--set", "3", "--big-l", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 2.0 / 26f64.sqrt()).abs() < 1e-6);
    assert_eq!(v["certified"], Value::Bool(true));
    assert!((v["compatibility"].as_f64().unwrap() - 2.0 / 13.0).abs() < 1e-6);
}

#[test]
fn degenerate_eigenvalue_reports_infinite_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let m = worked_matrix(dir.path(), false);
    let out = wdnorm(&["eigenvalue", "--matrix", m.to_str().unwrap(), "--set", "3", "--big-l", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["value"].as_f64(), Some(0.0));
    assert_eq!(v["effective_sparsity"], Value::from("inf"));
}

#[test]
fn norm_and_dual_inline() {
    let out = wdnorm(&["norm", "--norm-spec", r#"{"family":"l1"}"#, "--vector", "3,-4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["value"].as_f64(), Some(7.0));

    let out = wdnorm(&["dual", "--norm-spec", r#"{"family":"l1"}"#, "--vector", "-3,4"]);
    assert_eq!(stdout_json(&out)["value"].as_f64(), Some(4.0));

    let spec = r#"{"family":"cone","cone":"monotone"}"#;
    let out = wdnorm(&["norm", "--norm-spec", spec, "--vector", "3,4"]);
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 50f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["partition"], serde_json::json!([[1, 2]]));
}

#[test]
fn norm_spec_from_file_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("group.json");
    std::fs::write(&spec, r#"{"family":"group","groups":[[1,2],[3]]}"#).unwrap();
    let out = wdnorm(&[
        "norm",
        "--norm-spec",
        spec.to_str().unwrap(),
        "--vector",
        "3,4,-1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value"));
    let v: f64 = lines.next().unwrap().parse().unwrap();
    assert!((v - (2f64.sqrt() * 5.0 + 1.0)).abs() < 1e-12);
}

#[test]
fn solve_writes_to_out_and_flags_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let x = small_design(dir.path());
    let target = dir.path().join("fit.json");
    let y = "1.2,-0.3,0.8,1.9,0.1,-1.1";
    let out = wdnorm(&[
        "solve",
        "--matrix",
        x.to_str().unwrap(),
        "--response",
        y,
        "--lambda",
        "0.05",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(fit["converged"], Value::Bool(true));
    assert!(fit["kkt_residual"].as_f64().unwrap() <= 1e-8);

    let out = wdnorm(&[
        "solve",
        "--matrix",
        x.to_str().unwrap(),
        "--response",
        y,
        "--lambda",
        "0.05",
        "--max-iter",
        "1",
        "--tol",
        "1e-14",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_overlap_groups() {
    let dir = tempfile::tempdir().unwrap();
    let x = small_design(dir.path());
    let out = wdnorm(&[
        "solve",
        "--matrix",
        x.to_str().unwrap(),
        "--response",
        "1.2,-0.3,0.8,1.9,0.1,-1.1",
        "--lambda",
        "0.05",
        "--overlap-groups",
        "1,2;2,3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let parts = v["parts"].as_array().unwrap();
    assert_eq!(parts.len(), 2);
    let beta = v["beta"].as_array().unwrap();
    for j in 0..3 {
        let s: f64 = parts.iter().map(|p| p[j].as_f64().unwrap()).sum();
        assert!((s - beta[j].as_f64().unwrap()).abs() < 1e-15);
    }
}

fn write_config(dir: &Path) -> PathBuf {
    let x = small_design(dir);
    let cfg = serde_json::json!({
        "design": {"kind": "file", "path": x.file_name().unwrap().to_str().unwrap()},
        "beta0": [1.0, 0.0, -0.5],
        "norm": {"family": "l1"},
        "sigma": 0.3,
        "replicates": 8,
        "seed": 5,
        "delta_slack": 0.25
    });
    let path = dir.join("exp.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn oracle_run_is_deterministic_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let report = dir.path().join("report.jsonl");
    let run = || {
        wdnorm(&[
            "oracle",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ])
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let bytes = std::fs::read(&report).unwrap();
    let summary = std::fs::read(dir.path().join("report.summary.csv")).unwrap();
    let second = run();
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(bytes, std::fs::read(&report).unwrap());
    assert_eq!(summary, std::fs::read(dir.path().join("report.summary.csv")).unwrap());

    let text = String::from_utf8(bytes).unwrap();
    let reports: Vec<ReplicateReport> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reports.len(), 8);
    let v = stdout_json(&first);
    assert_eq!(v["failed"].as_u64(), Some(0));
}

#[test]
fn compare_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let x = small_design(dir.path());
    let spec = r#"{"family":"cone","cone":"monotone"}"#;
    let out = wdnorm(&[
        "compare",
        "--matrix",
        x.to_str().unwrap(),
        "--set",
        "1",
        "--big-l",
        "1",
        "--norm-spec",
        spec,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["l1_holds"], Value::Bool(true));

    let out = wdnorm(&[
        "bound",
        "--matrix",
        x.to_str().unwrap(),
        "--norm-spec",
        spec,
        "--draws",
        "200",
        "--seed",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["holds"], Value::Bool(true));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(wdnorm(&["eigenvalue", "--bogus"]).status.code(), Some(1));
    assert_eq!(wdnorm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(wdnorm(&["norm", "--vector", "1"]).status.code(), Some(1));
}

#[test]
fn input_errors_carry_codes() {
    let out = wdnorm(&["eigenvalue", "--matrix", "/nonexistent.csv", "--set", "1", "--big-l", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[E_IO]"));

    let dir = tempfile::tempdir().unwrap();
    let m = worked_matrix(dir.path(), true);
    let out = wdnorm(&["eigenvalue", "--matrix", m.to_str().unwrap(), "--set", "4", "--big-l", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[E_INDEX]"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,x\n").unwrap();
    let out = wdnorm(&["eigenvalue", "--matrix", bad.to_str().unwrap(), "--set", "1", "--big-l", "1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[E_PARSE]"));

    let out = wdnorm(&[
        "eigenvalue",
        "--matrix",
        m.to_str().unwrap(),
        "--set",
        "2",
        "--big-l",
        "1",
        "--norm-spec",
        r#"{"family":"cone","cone":"monotone"}"#,
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[E_NOT_ALLOWED]"));
}
