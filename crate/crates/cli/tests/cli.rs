//! End-to-end checks of the binary: command surface, exit codes, JSON
//! error objects, and byte determinism across runs and thread counts.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hinderfit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_error(out: &Output) -> Value {
    let doc: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    doc["error"].clone()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Writes a noiseless k=1 series for gate and fit tests.
fn synth_file(dir: &Path, name: &str, n: u32, sigma: f64) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = run(&[
        "synth", "--family", "sth", "--k", "1", "--gu", "0.5", "--qh", "1e4", "--th", "30",
        "--t0", "10", "--t1", "60", "--n", &n.to_string(), "--sigma", &sigma.to_string(),
        "--seed", "11",
    ]);
    assert_eq!(code(&out), 0);
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn eval_reports_the_boundary_values() {
    let out = run(&["eval", "--family", "sth", "--k", "2", "--x", "0"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["h"], 1.0);
    assert_eq!(v["dh_dx"], 0.5);
    assert_eq!(v["g_factor"], 0.5);
    assert_eq!(v["f"], 1.0);
    assert_eq!(v["asymmetry"], 0.0);
    assert_eq!(v["family"], "sth_k2");
}

#[test]
fn eval_matches_the_logistic_closed_form() {
    let out = run(&["eval", "--family", "logistic", "--x", "3"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let h = v["h"].as_f64().unwrap();
    assert!((h - 2.0 / (1.0 + (-3.0f64).exp())).abs() < 1e-12);
    assert!((h - 1.905148).abs() < 1e-6);
}

#[test]
fn eval_accepts_negative_positions() {
    let out = run(&["eval", "--family", "sth", "--k", "1", "--x", "-5"]);
    assert_eq!(code(&out), 0);
    let h = stdout_json(&out)["h"].as_f64().unwrap();
    assert!(h > 0.0 && h < 0.02);
}

#[test]
fn eval_validates_the_order_flag() {
    let out = run(&["eval", "--family", "sth", "--x", "1"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "config");

    let out = run(&["eval", "--family", "logistic", "--k", "2", "--x", "1"]);
    assert_eq!(code(&out), 2);

    let out = run(&["eval", "--family", "sth", "--k", "99", "--x", "1"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "kernel");
}

#[test]
fn synth_emits_deterministic_csv() {
    let args = [
        "synth", "--family", "sth", "--k", "1", "--gu", "0.5", "--qh", "1e4", "--th", "30",
        "--t0", "10", "--t1", "60", "--n", "12", "--sigma", "0.02", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,Q"));
    assert_eq!(lines.count(), 12);
    assert!(text.starts_with("t,Q\n1.0000000000000000e1,"));
}

#[test]
fn synth_validates_the_grid() {
    let out = run(&[
        "synth", "--family", "sth", "--k", "1", "--gu", "0.5", "--qh", "1e4", "--th", "30",
        "--t0", "60", "--t1", "10", "--n", "12",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "config");
}

#[test]
fn trend_quantity_test_matches_the_mk_formula() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 8, 0.0);

    // Strictly increasing n=8: S=28, Z=(28-1)/sqrt(65.333).
    let out = run(&["trend", csv.to_str().unwrap(), "--on", "q"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["direction"], "increasing");
    assert_eq!(v["s"], 28);
    let z = v["z"].as_f64().unwrap();
    assert!((z - 3.3404).abs() < 1e-4);

    // The full gate needs one more row than either single test.
    let out = run(&["trend", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "config");
}

#[test]
fn trend_passes_decelerating_growth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 9, 0.0);

    let out = run(&["trend", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["q_trend"]["direction"], "increasing");
    assert_eq!(v["rate_trend"]["direction"], "decreasing");

    let out = run(&["trend", csv.to_str().unwrap(), "--on", "g"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["direction"], "decreasing");
    assert_eq!(v["s"], -28);
}

#[test]
fn trend_fails_declining_data_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dec.csv");
    let rows: Vec<String> = (0..10).map(|i| format!("{i},{}", 100 - 5 * i)).collect();
    std::fs::write(&csv, format!("t,Q\n{}\n", rows.join("\n"))).unwrap();

    let out = run(&["trend", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn fit_recovers_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 60, 0.01);
    let report = dir.path().join("report.json");
    let curves = dir.path().join("curves.csv");

    let out = run(&[
        "fit", csv.to_str().unwrap(), "--families", "sth", "--k-max", "3",
        "--out", report.to_str().unwrap(), "--curves", curves.to_str().unwrap(),
        "--grid", "40",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let doc: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["schema"], "hinderfit/1");
    let model = &doc["chosen"]["model"];
    assert_eq!(model["family"]["type"], "single_term");
    assert_eq!(model["family"]["k"], 1);
    let g_u = model["g_u"].as_f64().unwrap();
    let q_h = model["q_h"].as_f64().unwrap();
    assert!((g_u - 0.5).abs() / 0.5 < 0.05);
    assert!((q_h - 1e4).abs() / 1e4 < 0.05);

    let text = std::fs::read_to_string(&curves).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x_minus_xh,Q_model,g_model,Q_data,rel_residual"));
    // 40 grid points share both endpoints with the 60 observations.
    assert_eq!(lines.count(), 98);
}

#[test]
fn fit_report_goes_to_stdout_without_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 30, 0.0);

    let out = run(&["fit", csv.to_str().unwrap(), "--families", "sth", "--k-max", "2"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "hinderfit/1");
    assert_eq!(doc["gate"]["passed"], true);
}

#[test]
fn fit_maps_named_columns() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth_file(dir.path(), "s.csv", 30, 0.0);
    let renamed = dir.path().join("renamed.csv");
    let text = std::fs::read_to_string(&src).unwrap().replacen("t,Q", "year,pop", 1);
    std::fs::write(&renamed, text).unwrap();

    let out = run(&[
        "fit", renamed.to_str().unwrap(), "--families", "sth", "--k-max", "2",
        "--t-col", "year", "--q-col", "pop",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["fit", renamed.to_str().unwrap(), "--families", "sth", "--k-max", "2"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "missing_column");
}

#[test]
fn fit_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 40, 0.02);

    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out = bin()
            .args(["fit", csv.to_str().unwrap(), "--families", "sth,logistic", "--k-max", "4"])
            .env("HINDERFIT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        reports.push(out.stdout);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn fit_rejects_bad_inputs_with_json_errors() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["fit", "/no/such/file.csv"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "io");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,Q\n1,2\nx,3\n").unwrap();
    let out = run(&["fit", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "parse");
    assert!(err["message"].as_str().unwrap().contains("line 3"));

    let dup = dir.path().join("dup.csv");
    std::fs::write(&dup, "t,Q\n1,2\n1,3\n2,4\n").unwrap();
    let out = run(&["fit", dup.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "duplicate_time");

    let csv = synth_file(dir.path(), "s.csv", 30, 0.0);
    let out = run(&["fit", csv.to_str().unwrap(), "--grid", "10"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "config");

    let out = run(&["fit", csv.to_str().unwrap(), "--families", "multi"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn fit_reports_gate_failure_with_the_gate_payload() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dec.csv");
    let rows: Vec<String> = (0..10).map(|i| format!("{i},{}", 100 - 5 * i)).collect();
    std::fs::write(&csv, format!("t,Q\n{}\n", rows.join("\n"))).unwrap();

    let out = run(&["fit", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "gate");
    assert_eq!(err["gate"]["passed"], false);
    assert_eq!(err["gate"]["q_passed"], false);
}

#[test]
fn forecast_extends_the_fitted_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 30, 0.0);
    let report = dir.path().join("report.json");
    let out = run(&[
        "fit", csv.to_str().unwrap(), "--families", "sth", "--k-max", "2",
        "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let out = run(&["forecast", report.to_str().unwrap(), "--to", "90", "--step", "10"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x_minus_xh,Q,g");
    // 60 to 90 in steps of 10: anchor plus three forward points.
    assert_eq!(lines.len(), 5);
    let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    let last: f64 = lines[4].split(',').next().unwrap().parse().unwrap();
    assert_eq!(first, 60.0);
    assert_eq!(last, 90.0);

    // Q grows along the forecast, g shrinks.
    let q: Vec<f64> =
        lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let g: Vec<f64> =
        lines[1..].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[1] > w[0]));
    assert!(g.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn forecast_validates_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_file(dir.path(), "s.csv", 30, 0.0);
    let report = dir.path().join("report.json");
    run(&[
        "fit", csv.to_str().unwrap(), "--families", "sth", "--k-max", "2",
        "--out", report.to_str().unwrap(),
    ]);

    let out = run(&["forecast", report.to_str().unwrap(), "--to", "50"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "config");

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{\"schema\":\"other/9\"}").unwrap();
    let out = run(&["forecast", garbage.to_str().unwrap(), "--to", "90"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "schema");
}
