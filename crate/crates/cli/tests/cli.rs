use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn magstark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magstark"))
        .args(args)
        .output()
        .expect("spawn magstark")
}

#[test]
fn malformed_grid_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nnx = 4\n").unwrap();
    let out = magstark(&[
        "verify-theorem1",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nx"), "stderr: {err}");
    assert!(!dir.path().join("verify-theorem1.json").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "[fields]\nbb = 1.0\n").unwrap();
    let out = magstark(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bb"));
}

#[test]
fn zero_potential_run_writes_envelope_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("theorem1_zero.toml");
    let out = magstark(&[
        "verify-theorem1",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("verify-theorem1.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(json["experiment"], "verify-theorem1");
    assert!(json["timings"]["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(dir.path().join("verify-theorem1.csv").exists());
    assert!(dir.path().join("verify-theorem1.config.toml").exists());
}

#[test]
fn failing_gate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("theorem1.toml");
    let out = magstark(&[
        "verify-theorem1",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "grid.nx=21",
        "--set",
        "grid.ny=21",
        "--set",
        "experiment.rel_tol=1e-12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL relative_residual"));
}

#[test]
fn convergence_needs_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("theorem1.toml");
    let out = magstark(&[
        "convergence",
        "verify-theorem1",
        "--config",
        cfg.to_str().unwrap(),
        "--levels",
        "15,21",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convergence_writes_named_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("expansion.toml");
    let out = magstark(&[
        "convergence",
        "expansion-check",
        "--config",
        cfg.to_str().unwrap(),
        "--levels",
        "11,13,15",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("convergence-expansion-check.csv")).unwrap();
    assert!(csv.starts_with("n,h,quantity,value,order\n"));
    assert!(csv.contains("exact"));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let cfg = config_path("theorem1.toml");
    let out = magstark(&["theorem9", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verify-theorem1"));
}
