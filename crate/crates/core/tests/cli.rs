use std::fs;
use std::path::Path;
use std::process::Command;

fn hwl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hwl"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn coefficients_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 1, "paths": 100, "experiment": {"coefficients": {"joint": [[0.5, 0.0], [0.0, 0.5]]}}}"#,
    );
    let out = dir.path().join("out");
    let status = hwl().arg("run").arg(&cfg).arg("--out-dir").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let text = fs::read_to_string(out.join("coefficients.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_digest="));
    assert_eq!(lines[1], "rows,cols,alpha_exact,rho_exact");
    let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[2], 0.25);
    assert_eq!(fields[3], 1.0);
}

#[test]
fn zero_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 1, "paths": 200, "experiment": {"tightness":
            {"model": "iid-gauss", "n": 1024, "delta": 0.0, "eps": [1.0], "p": 3.0}}}"#,
    );
    let out = hwl().arg("run").arg(&cfg).arg("--out-dir").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["error"], "config");
    assert!(report["message"].as_str().unwrap().contains("delta"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 1, "paths": 200, "pathz": 3, "experiment": {"coefficients": {"joint": [[1.0]]}}}"#,
    );
    let status = hwl().arg("run").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // N_3 of the p = 3 tower is far beyond the simulation budget
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 1, "paths": 100, "experiment": {"counterexample":
            {"p": 3.0, "event_level": 3, "sigma_m": [0.0], "n_grid": [64]}}}"#,
    );
    let out = hwl().arg("run").arg(&cfg).arg("--out-dir").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 7, "paths": 300, "experiment": {"tightness":
            {"model": "ar1:0.5", "n": 2048, "delta": 0.25, "eps": [0.5, 1.0], "p": 3.0}}}"#,
    );
    let read_all = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let status = hwl().arg("run").arg(&cfg).arg("--out-dir").arg(&out).arg("--threads").arg(threads).status().unwrap();
        assert_eq!(status.code(), Some(0));
        ["tightness_levels.csv", "tightness_sum.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    let a = read_all("a", "1");
    let b = read_all("b", "4");
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"seed": 7, "paths": 100, "experiment": {"fuk-nagaev":
            {"model": "bernoulli-shift", "n": 64, "r": 4.0, "lambdas": [1.0, 2.0]}}}"#,
    );
    let first_line = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let status = hwl().arg("run").arg(&cfg).arg("--out-dir").arg(&out).env("HWL_SEED", seed).status().unwrap();
        assert_eq!(status.code(), Some(0));
        fs::read_to_string(out.join("fuk_nagaev_bound.csv")).unwrap().lines().next().unwrap().to_string()
    };
    assert_ne!(first_line("1", "x"), first_line("2", "y"));
}

#[test]
fn presets_lists_models() {
    let out = hwl().arg("presets").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["iid-gauss", "bernoulli-shift", "ar1:phi", "counterexample:p"] {
        assert!(text.contains(name));
    }
}
