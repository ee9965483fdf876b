//! End-to-end tests for the command-line binary: exit codes, report files,
//! and deterministic reruns.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_holoifs");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should launch")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn markov_config(dir: &Path) -> String {
    write_config(
        dir,
        "markov.json",
        r#"{
            "maps": ["x/2", "(x + 1)/2"],
            "weight_mode": "per_map",
            "u": ["0.5", "0.5"],
            "grid_n": 64,
            "steps": 4000,
            "bins": 32,
            "candidates": [
                "lifted",
                {"x0": 0.6666666666666666, "preperiod": [], "period": [0, 1]}
            ]
        }"#,
    )
}

fn potential_config(dir: &Path) -> String {
    write_config(
        dir,
        "potential.json",
        r#"{
            "maps": ["x/2", "(x + 1)/2"],
            "weight_mode": "weight_function",
            "phi": "2 + cos(2*pi*x)",
            "grid_n": 64
        }"#,
    )
}

/// Two branches with a fixed line segment each; the eigenfunction iteration
/// stalls above tolerance on this system while the radius itself locks in.
fn stalling_config(dir: &Path) -> String {
    write_config(
        dir,
        "stalling.json",
        r#"{
            "maps": ["x", "1 - x"],
            "weight_mode": "weight_function",
            "phi": "2 + cos(2*pi*x)",
            "grid_n": 64,
            "max_iter": 500
        }"#,
    )
}

fn json_file(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"maps": ["x/2"], "weight_mode": "per_map", "u": ["1"], "bogus": 3}"#,
    );
    let out = run(&["--config", &cfg, "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn pressure_needs_a_weight_function() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = markov_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "pressure"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weight_function"));
}

#[test]
fn spectrum_reports_the_eigenvalue_and_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = markov_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "spectrum"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = json_file(&out_dir, "spectrum.json");
    assert!((report["rho"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(report["converged"], Value::Bool(true));

    let h = std::fs::read_to_string(out_dir.join("h.csv")).unwrap();
    assert!(h.starts_with("x,value\n"));
    assert_eq!(h.lines().count(), 66); // header + 65 nodes
    let nu = std::fs::read_to_string(out_dir.join("nu.csv")).unwrap();
    assert!(nu.starts_with("x,weight\n"));
}

#[test]
fn stalled_iteration_still_writes_reports_and_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = stalling_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "spectrum"]);
    assert_eq!(out.status.code(), Some(3));

    let report = json_file(&out_dir, "spectrum.json");
    assert_eq!(report["converged"], Value::Bool(false));
    assert!((report["rho"].as_f64().unwrap() - 6.0).abs() < 1e-3);
    assert!(out_dir.join("h.csv").exists() && out_dir.join("nu.csv").exists());
}

#[test]
fn verify_prints_a_passing_battery_for_a_stochastic_system() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = markov_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(0));

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS holonomy[0")));
    assert!(stdout.lines().any(|l| l.starts_with("PASS orbit_closure[1")));
    assert!(!stdout.contains("FAIL"), "unexpected FAIL in:\n{stdout}");

    let report = json_file(&out_dir, "verify.json");
    let candidates = report["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 2);
    for c in candidates {
        for check in c["checks"].as_array().unwrap() {
            assert_eq!(check["pass"], Value::Bool(true), "check: {check}");
        }
    }
}

#[test]
fn entropy_matches_the_closed_form_for_fair_coin_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = markov_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "entropy"]);
    assert_eq!(out.status.code(), Some(0));

    let report = json_file(&out_dir, "entropy.json");
    let rows = report["candidates"].as_array().unwrap();
    let lifted_inf = rows[0]["inf"]["value"].as_f64().unwrap();
    let lifted_alt = rows[0]["alt"]["value"].as_f64().unwrap();
    assert!((lifted_inf - std::f64::consts::LN_2).abs() < 1e-4);
    assert!((lifted_alt - std::f64::consts::LN_2).abs() < 1e-12);
    let orbit_alt = rows[1]["alt"]["value"].as_f64().unwrap();
    assert!(orbit_alt.abs() < 1e-12);
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = markov_config(tmp.path());
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "11",
            "simulate",
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["simulate.json", "trajectory.csv", "empirical.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let report = json_file(&out_a, "simulate.json");
    assert_eq!(report["normalized"], Value::Bool(false));
    assert!(report["empirical_l1"].as_f64().unwrap() < 0.2);
}

#[test]
fn beta_flag_overrides_the_config_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = potential_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--beta",
        "2",
        "beta-sweep",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("beta_sweep.csv")).unwrap();
    assert!(csv.starts_with("beta,rho,pressure,integral_ln_phi,residual_h,residual_nu,converged\n"));
    assert_eq!(csv.lines().count(), 2); // header + the single overridden row

    let report = json_file(&out_dir, "beta_sweep.json");
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0]["beta"].as_f64().unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn normalize_produces_stochastic_weights_and_holonomy_defects_vanish() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = potential_config(tmp.path());
    let out_dir = tmp.path().join("out");

    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "normalize"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&out_dir, "normalize.json");
    assert!((report["rho"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert!(report["markov_defect"].as_f64().unwrap() < 1e-10);
    let v = std::fs::read_to_string(out_dir.join("v.csv")).unwrap();
    assert!(v.starts_with("x,v_0,v_1\n"));
    let mu = std::fs::read_to_string(out_dir.join("mu.csv")).unwrap();
    assert!(mu.starts_with("x,weight\n"));

    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "holonomy"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&out_dir, "holonomy.json");
    let rows = report["candidates"].as_array().unwrap();
    assert_eq!(rows.len(), 1); // default candidate list is just the lift
    assert!(rows[0]["holonomy_defect"].as_f64().unwrap() < 1e-10);
    assert!(rows[0]["marginal_invariance_defect"].as_f64().unwrap() < 1e-10);
    assert!(rows[0]["inequality_defect"].as_f64().unwrap() > -1e-12);
}

#[test]
fn pressure_agrees_between_spectral_and_variational_routes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = potential_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "pressure"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = json_file(&out_dir, "pressure.json");
    assert!(report["gap"].as_f64().unwrap() < 1e-5);
    assert_eq!(report["variational"]["argmax"], Value::Number(0.into()));
}
