//! End-to-end tests of the singlim binary: exit codes, output formats, and
//! a few numerical spot checks through the full CLI path.

use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_singlim"))
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_reports_impulse_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "sys.json",
        r#"{"N": [[0.0, 1.0], [0.0, 0.0]], "x0": [1.5, 2.5], "f": "[0, t]"}"#,
    );
    let out = bin().args(["solve", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["nilpotency"]["index"], 2);
    let coeff = &report["solution"]["impulses"][0]["coeff"];
    assert_eq!(coeff[0], -2.5);
    assert_eq!(coeff[1].as_f64().unwrap(), 0.0);
}

#[test]
fn converge_writes_csv_with_monotone_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "study.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[1]"},
            "family": {"kind": "shift"},
            "indices": [16, 32, 64],
            "bank": [{"center": 0.0, "radius": 1.0, "direction": [1.0]}]
        }"#,
    );
    let report = dir.path().join("report.csv");
    let out = bin()
        .args(["converge", "--config", &cfg, "--out", report.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "i,testfn_id,pairing_perturbed,pairing_limit,abs_error,quad_err_estimate"
    );
    let errors: Vec<f64> = lines
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn converge_json_report_has_verdict_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "study.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [0.0], "f": "[0]"},
            "family": {"kind": "shift"},
            "indices": [2, 4, 8]
        }"#,
    );
    let out = bin().args(["converge", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["verdict"], "converging");
    assert!(report["threshold"].as_f64().unwrap() > 0.0);
    assert!(report["threshold_source"].as_str().unwrap().contains("default"));
}

#[test]
fn perturb_emits_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "perturb.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[1]"},
            "index": 10,
            "t_max": 1.0,
            "points": 5
        }"#,
    );
    let out = bin().args(["perturb", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1");
    assert_eq!(lines.len(), 6);
    // x_i(t) = 3 e^{-10 t} - 1 for the shift family at i = 10.
    let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    let expect = 3.0 * (-10.0f64).exp() - 1.0;
    assert!((last[1] - expect).abs() <= 1e-8, "{} vs {expect}", last[1]);
}

#[test]
fn reduce_reports_fast_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "pencil.json",
        r#"{"E": [[0.0, 1.0], [0.0, 0.0]], "A": [[1.0, 0.0], [0.0, 1.0]],
            "g": "[0, 0]", "x0": [0.0, 0.0]}"#,
    );
    let out = bin().args(["reduce", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["fast"]["nilpotency"]["index"], 2);
    assert_eq!(report["shift"], 0.0);
}

#[test]
fn pair_returns_scalar_pairing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "pair.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[1]"},
            "testfn": {"center": 0.0, "radius": 1.0, "direction": [1.0]}
        }"#,
    );
    let out = bin().args(["pair", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    // <x, lambda> = -integral_0^1 psi = -0.2219969...
    let value = report["value"].as_f64().unwrap();
    assert!((value - -0.2219969).abs() <= 1e-6, "value {value}");
}

#[test]
fn uniqueness_agreeing_families_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "uniq.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[1]"},
            "family": [{"kind": "shift"}, {"kind": "scaled_shift", "c": 2.0}],
            "indices": [64, 128, 256],
            "bank": [{"center": 0.0, "radius": 1.0, "direction": [1.0]}],
            "verdict_threshold": 0.01
        }"#,
    );
    let out = bin().args(["uniqueness", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["agree"], true);
}

#[test]
fn localize_within_allowance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "loc.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[sin(t)]"},
            "family": {"kind": "shift"},
            "index": 20,
            "b": 3.0,
            "testfn": {"center": 1.0, "radius": 1.0, "direction": [1.0]}
        }"#,
    );
    let out = bin().args(["localize", "--config", &cfg]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["within"], true);
}

#[test]
fn localize_rejects_support_past_taper() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "loc.json",
        r#"{
            "system": {"N": [[0.0]], "x0": [2.0], "f": "[sin(t)]"},
            "family": {"kind": "shift"},
            "index": 20,
            "b": 3.0,
            "testfn": {"center": 5.0, "radius": 1.0, "direction": [1.0]}
        }"#,
    );
    let out = bin().args(["localize", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "bad.json", "{ not json");
    let out = bin().args(["solve", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot parse"));
}

#[test]
fn missing_config_file_is_input_error() {
    let out = bin()
        .args(["solve", "--config", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_nilpotent_matrix_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "sys.json",
        r#"{"N": [[1.0]], "x0": [0.0], "f": "[0]"}"#,
    );
    let out = bin().args(["solve", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nilpotent"));
}
