use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use poincare_lab_cli::{Experiment, RunReport};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poincare-lab"))
        .current_dir(dir)
        .env("POINCARE_LAB_THREADS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn run_dir(dir: &Path, experiment: Experiment) -> std::path::PathBuf {
    let prefix = format!("{experiment}-");
    fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|d| d.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with(&prefix))
        .unwrap()
}

fn value(report: &RunReport, table: &str, column: &str) -> f64 {
    report.table(table).unwrap().column(column).unwrap()[0]
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "").unwrap();
    let out = cli(dir.path(), &["validate", "empty.toml"]);
    assert!(out.status.success());
    let echo = String::from_utf8(out.stdout).unwrap();
    assert!(echo.contains("experiment = \"certify\"") && echo.contains("potential = \"circle2d\""), "{echo}");
}

#[test]
fn validate_names_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "seed = 1\nepsilonn = 0.1\neps = [0.1, 0]\n").unwrap();
    let out = cli(dir.path(), &["validate", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2: `epsilonn`") && err.contains("line 3: `eps`"), "{err}");
}

#[test]
fn flags_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "spectrum", "--eps", "0.1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    let bad = Command::new(env!("CARGO_BIN_EXE_poincare-lab"))
        .current_dir(dir.path())
        .env("POINCARE_LAB_THREADS", "many")
        .args(["run", "lb-gap"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn certify_reports_circle_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "certify", "--potential", "circle2d"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let at = run_dir(dir.path(), Experiment::Certify);
    for f in ["config.json", "config.toml", "report.json", "certificates.json", "certificates.csv", "critical_points.csv"] {
        assert!(at.join(f).exists(), "{f}");
    }
    let r = RunReport::load(&at).unwrap();
    assert!(r.recheck().is_empty());
    assert!((value(&r, "certificates", "nu") - 0.75).abs() < 1e-9);
    assert!((value(&r, "certificates", "nu_eb") - 2.0).abs() < 1e-9);
    assert!((value(&r, "certificates", "g0") - 0.1875).abs() < 1e-9);
    assert_eq!(at.file_name().unwrap().to_str().unwrap(), r.experiment);
    assert!(r.experiment.ends_with(&r.inputs_hash[..12]));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "sweep", "--potential", "quadratic1d", "--eps", "0.1,0.05", "--seed", "3"];
    assert!(cli(dir.path(), &args).status.success());
    let at = run_dir(dir.path(), Experiment::Sweep);
    let first = RunReport::load(&at).unwrap();
    let csv = fs::read_to_string(at.join("sweep.csv")).unwrap();
    assert!(cli(dir.path(), &args).status.success());
    let second = RunReport::load(&at).unwrap();
    assert_eq!(first.tables, second.tables);
    assert_eq!(first.assertions, second.assertions);
    assert_eq!(csv, fs::read_to_string(at.join("sweep.csv")).unwrap());
    assert!(csv.starts_with("epsilon,gap_hat,gap_over_eps,ci_lo,ci_hi,r2"));
}

#[test]
fn failed_assertions_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "certify", "--potential", "quartic"]);
    assert_eq!(out.status.code(), Some(1));
    let r = RunReport::load(&run_dir(dir.path(), Experiment::Certify)).unwrap();
    assert!(r.assertions.iter().any(|a| !a.passed && a.column == "normal_curvature"));
    assert!(r.recheck().is_empty());
}

#[test]
fn failed_stages_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "tube", "--manifold", "klein"]);
    assert_eq!(out.status.code(), Some(1));
    let r = RunReport::load(&run_dir(dir.path(), Experiment::Tube)).unwrap();
    assert!(!r.stages[0].ok && r.stages[0].error.as_deref().unwrap().contains("klein"));
}

#[test]
fn tube_limit_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "tube", "--manifold", "circle", "--radii", "0.2,0.1,0.05,0.025"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = RunReport::load(&run_dir(dir.path(), Experiment::Tube)).unwrap();
    assert!((value(&r, "stability", "limit") - 1.0).abs() < 0.01);
    assert_eq!(r.table("samples").unwrap().rows.len(), 4);
}

#[test]
fn weyl_tables_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "weyl", "--manifold", "circle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = RunReport::load(&run_dir(dir.path(), Experiment::Weyl)).unwrap();
    assert_eq!(r.table("weyl").unwrap().rows.len(), 3);
}

#[test]
fn report_aggregates_prior_runs() {
    let dir = tempfile::tempdir().unwrap();
    let early = cli(dir.path(), &["run", "report"]);
    assert_eq!(early.status.code(), Some(1));
    for args in [
        vec!["run", "ledger"],
        vec!["run", "lb-gap", "--manifold", "circle"],
        vec!["run", "spectrum", "--eps", "0.05,0.02"],
    ] {
        let out = cli(dir.path(), &args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    }
    assert!(cli(dir.path(), &["run", "report"]).status.success());
    let r = RunReport::load(&run_dir(dir.path(), Experiment::Report)).unwrap();
    let fig = r.table("figure").unwrap();
    assert_eq!(fig.columns[..5], ["epsilon", "rho_measured", "ln_rho_measured", "bound_ln", "lambda1_s"]);
    assert_eq!(fig.column("epsilon").unwrap(), [0.05, 0.02]);
    let bound = fig.column("bound_ln").unwrap()[0];
    assert!(bound < -200.0, "{bound}");
    assert!(r.success() && r.recheck().is_empty());
}
