use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liftctl::{sweep_rows, ExperimentConfig, RowStatus};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liftctl"))
}

fn bundled() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/dc_motor_fig2.cfg")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_cmd(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const SHORT: &str = "[simulation]\nt_final = 2.0\n";

#[test]
fn version_prints_name() {
    let out = run_cmd(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("liftctl "));
}

#[test]
fn bundled_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cmd(&["run", bundled().to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    for f in ["trace.csv", "states.csv", "estimation_errors.csv", "cert.txt", "plot.svg"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,z1,z2,e1,e2,u,p2_hat,theta1_hat,V,Vdot_num,Vdot_analytic"
    );
    assert_eq!(lines.count(), 30_001);

    // exit status follows the certificate verdict
    let cert = fs::read_to_string(tmp.path().join("cert.txt")).unwrap();
    let all_pass = cert.lines().any(|l| l == "all_passed = pass");
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 3 }));
    assert!(cert.contains("safe_invariance = pass"));
    assert!(cert.contains("adjudication.preferred_p2_law_sign = +1"));
}

#[test]
fn trace_values_have_enough_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", SHORT);
    run_cmd(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    let row = trace.lines().nth(2).unwrap();
    for field in row.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert!(mantissa.chars().filter(char::is_ascii_digit).count() >= 12, "{field}");
        field.parse::<f64>().unwrap();
    }
}

#[test]
fn identical_config_gives_identical_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", SHORT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_cmd(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_cmd(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let ta = fs::read(a.join("trace.csv")).unwrap();
    assert!(!ta.is_empty());
    assert_eq!(ta, fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn estimation_error_file_is_log_scaled() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", SHORT);
    run_cmd(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let text = fs::read_to_string(tmp.path().join("estimation_errors.csv")).unwrap();
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // |Θ̂₁(0) − Θ₁| = 9.99, |p̂₂(0) − p₂| = 0 (floored)
    assert!((first[1] - 9.99f64.log10()).abs() < 1e-12);
    assert!(first[2] < -300.0);
}

#[test]
fn zero_p2_hat_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", "[estimates]\np2_hat = 0.0\n");
    let out = run_cmd(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p2_hat(0) cannot be zero"));
    assert!(!tmp.path().join("trace.csv").exists());
}

#[test]
fn initial_state_outside_safe_set_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", "[initial]\nx2 = 1.5\n[safe_set]\nxbar2 = 1.0\n");
    let out = run_cmd(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("safe set"));
}

#[test]
fn missing_or_malformed_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd(&["run", tmp.path().join("nope.cfg").to_str().unwrap()]).status.code(), Some(2));
    let bad = write_cfg(tmp.path(), "bad.cfg", "[controller\nk1 = 1\n");
    assert_eq!(run_cmd(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_3_with_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "c.cfg", "[simulation]\ndt = 0.5\nt_final = 1.0\n");
    let out = run_cmd(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t = 0"));
    let cert = fs::read_to_string(tmp.path().join("cert.txt")).unwrap();
    assert!(cert.contains("safe_invariance = fail"));
    assert!(cert.contains("safe_invariance.first_violation = 0.000000"));
}

#[test]
fn gain_sweep_rows_are_ordered_and_safe() {
    let cfg = ExperimentConfig::from_toml_str("[sweep]\nk1 = [0.5, 1.0, 2.0]\n").unwrap();
    let rows = sweep_rows(&cfg).unwrap();
    assert_eq!(rows.iter().map(|r| r.point.k1).collect::<Vec<_>>(), [0.5, 1.0, 2.0]);
    assert!(rows.iter().all(|r| r.status == RowStatus::Ok && r.safe));
}

#[test]
fn invalid_sweep_row_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "s.cfg",
        "[simulation]\nt_final = 1.0\n[sweep]\nx2_0 = [0.5, 1.5, -0.5]\n",
    );
    let out = run_cmd(&["sweep", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    let status: Vec<String> = rdr.records().map(|r| r.unwrap()[7].to_string()).collect();
    assert_eq!(status, ["ok", "invalid-config", "ok"]);
}

#[test]
fn empty_sweep_gives_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "s.cfg", "[sweep]\nk1 = []\n");
    let out = run_cmd(&["sweep", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn check_assumptions_on_bundled_plant() {
    let out = run_cmd(&["check-assumptions", bundled().to_str().unwrap(), "--grid", "21"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("violations = 0"));
}
