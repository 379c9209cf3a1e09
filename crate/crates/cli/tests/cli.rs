//! Black-box tests against the built binary plus schema round-trip checks
//! through the config module.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gfvc::{evaluate_functional, FunctionHandle};
use gfvc_cli::config::RunConfig;
use gfvc_cli::registry;

fn gfvc_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfvc"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    gfvc_bin().args(args).output().unwrap()
}

#[test]
fn zero_function_prints_fixed_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("op.json");
    write(
        &cfg,
        r#"{
  "kernel": { "kind": "riemann_liouville", "order": 0.5 },
  "pset": { "a": 0.0, "b": 1.0, "p": 1.0, "q": 0.0 },
  "op": { "operator": "integral", "function": "zero", "points": [0.25, 0.5] }
}"#,
    );
    let out = run(&["op", "eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "0.000000000000\n0.000000000000\n"
    );
}

#[test]
fn unknown_config_key_is_rejected_with_a_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(
        &cfg,
        r#"{ "problem": { "lagrangian": "free_particle", "boundary": "fixed_both", "y_a": [0.0], "y_b": [1.0] }, "treshold": 1.0 }"#,
    );
    let out = run(&["residual", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown field `treshold`"), "stderr: {err}");
    assert!(err.contains("line"), "stderr: {err}");
}

#[test]
fn missing_config_file_exits_one() {
    let out = run(&["solve", "--config", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn residual_above_threshold_exits_two_and_names_the_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("res.json");
    // y = t^2 on the free particle leaves a residual of 2 everywhere.
    write(
        &cfg,
        r#"{
  "problem": { "lagrangian": "free_particle", "boundary": "fixed_both", "y_a": [0.0], "y_b": [1.0] },
  "trajectory": "square",
  "threshold": 1e-8
}"#,
    );
    let out = run(&["residual", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("exceeds threshold"), "stdout: {text}");
    assert!(text.contains("2.0000000000"), "stdout: {text}");
}

#[test]
fn solve_emits_a_table_with_lf_endings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    let out_path = dir.path().join("line.csv");
    write(
        &cfg,
        &format!(
            r#"{{
  "problem": {{ "lagrangian": "free_particle", "boundary": "fixed_both", "y_a": [0.0], "y_b": [1.0] }},
  "basis_size": 6,
  "grid": {{ "count": 11 }},
  "output": {{ "path": "{}", "format": "csv" }}
}}"#,
            out_path.display()
        ),
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = fs::read(&out_path).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y_1"));
    assert_eq!(lines.count(), 11);
    // The extremal is the straight line; spot-check the midpoint row.
    assert!(text.contains("5.00000000000e-1,5.0000000"), "table: {text}");
}

#[test]
fn json_output_carries_columns_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("op.json");
    let out_path = dir.path().join("vals.json");
    write(
        &cfg,
        &format!(
            r#"{{
  "kernel": {{ "kind": "riemann_liouville", "order": 0.5 }},
  "op": {{ "operator": "integral", "function": "one", "points": [0.25] }},
  "output": {{ "path": "{}", "format": "json" }}
}}"#,
            out_path.display()
        ),
    );
    let out = run(&["op", "eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["columns"][1], "value");
    // Half-order integral of 1 at x is 2*sqrt(x/pi); at 0.25 that is 1/sqrt(pi).
    let v = doc["rows"][0][1].as_f64().unwrap();
    let exact = 1.0 / std::f64::consts::PI.sqrt();
    assert!((v - exact).abs() <= 1e-8, "value {v} vs {exact}");
}

#[test]
fn validate_reports_clean_problems_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.json");
    write(
        &cfg,
        r#"{ "problem": { "lagrangian": "harmonic", "boundary": "fixed_both", "y_a": [0.0], "y_b": [1.0], "omega": 2.0 } }"#,
    );
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("no findings"), "stdout: {text}");
}

#[test]
fn demo_rejects_resonant_frequencies_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("osc.csv");
    let out = gfvc_bin()
        .args([
            "demo",
            "oscillator",
            "--gamma",
            "0",
            "--omega",
            &std::f64::consts::PI.to_string(),
            "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("resonance"), "stderr: {err}");
    assert!(!out_path.exists());
}

#[test]
fn config_round_trip_preserves_functional_values() {
    let text = r#"{
  "kernel": { "kind": "exponential", "coefficient": 0.3 },
  "pset": { "a": 0.0, "b": 1.0, "p": 1.0, "q": 0.0 },
  "quadrature": { "panels": 6 },
  "problem": { "lagrangian": "harmonic", "boundary": "fixed_both", "y_a": [0.0], "y_b": [1.0], "omega": 2.0 }
}"#;
    let first = RunConfig::parse(text).unwrap();
    let reserialized = serde_json::to_string(&first).unwrap();
    let second = RunConfig::parse(&reserialized).unwrap();
    let p1 = registry::build_problem(&first).unwrap();
    let p2 = registry::build_problem(&second).unwrap();
    for k in 0..10 {
        let bump = 0.1 * k as f64;
        let y = FunctionHandle::scalar_with_deriv(
            (0.0, 1.0),
            move |t| t + bump * t * (1.0 - t),
            move |t| 1.0 + bump * (1.0 - 2.0 * t),
        )
        .unwrap();
        let a = evaluate_functional(&p1, &y, p1.quad()).unwrap();
        let b = evaluate_functional(&p2, &y, p2.quad()).unwrap();
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(1.0),
            "probe {k}: {a} vs {b}"
        );
    }
}
