use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ostop"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).arg("--quiet").output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_problem(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("problem.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn endpoint(v: &Value) -> f64 {
    match v {
        Value::String(s) if s == "inf" => f64::INFINITY,
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        v => v.as_f64().unwrap(),
    }
}

#[test]
fn solve_then_verify_reproduces_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let solution = dir.path().join("solution.json");
    let verification = dir.path().join("verification.json");
    let cfg = config("quintic_alpha2.json");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", solution.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["verify", "--solution", solution.to_str().unwrap(), "--out", verification.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let s = json(&solution);
    let v = json(&verification);
    assert_eq!(s["schema"], "ostop.solution.v1");
    assert_eq!(v["schema"], "ostop.verification.v1");
    let a = s["continuation"].as_array().unwrap();
    let b = v["continuation"].as_array().unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(b) {
        assert_eq!(endpoint(&x["lo"]).to_bits(), endpoint(&y["lo"]).to_bits());
        assert_eq!(endpoint(&x["hi"]).to_bits(), endpoint(&y["hi"]).to_bits());
    }
    assert_eq!(a[2]["hi"], "inf");
    let report = &v["verification"];
    assert_eq!(report["contact_points"], 5);
    assert!(report["smooth_fit_max"].as_f64().unwrap() < 1e-3);
}

#[test]
fn kinked_report_carries_coefficients() {
    let out = run(&["solve", "--config", config("kinked_alpha1.json").to_str().unwrap()]);
    assert!(out.status.success());
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    let first = &s["continuation"][0];
    assert_eq!(first["lo"], "-inf");
    let k2 = first["k2"].as_f64().unwrap();
    assert!((k2 - 0.26).abs() < 0.002, "k2 {k2}");
}

#[test]
fn samples_are_continuous_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let out = run(&["sample", "--config", config("quintic_alpha2.json").to_str().unwrap(), "--samples", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,g,V,region"));
    let rows: Vec<(f64, f64, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap(), f[3].to_string())
        })
        .collect();
    assert!(rows.len() > 100);
    // each jump against the slope seen on the neighbouring rows
    let h = rows[1].0 - rows[0].0;
    for w in rows.windows(4) {
        let slope = |i: usize| (w[i + 1].1 - w[i].1).abs() / h;
        let bound = 10.0 * h * (slope(0).max(slope(2)) + 1.0);
        assert!((w[2].1 - w[1].1).abs() < bound, "jump at x = {}", w[1].0);
    }
    assert!(rows.iter().any(|r| r.2 == "stop") && rows.iter().any(|r| r.2.starts_with("cont")));
}

#[test]
fn excessive_problem_stops_immediately() {
    let out = run(&["solve", "--config", config("excessive.json").to_str().unwrap()]);
    assert!(out.status.success());
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(s["continuation"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let bad = write_problem(dir.path(), r#"{"schema": "ostop.problem.v1"}"#);
    let out = run(&["solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["schema"], "ostop.error.v1");
    assert_eq!(err["error"]["kind"], "config");

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["solve", "--config", missing.to_str().unwrap()]).status.code(), Some(4));

    // g ≡ −1: the whole line is negative and enlarges to everything
    let degenerate = write_problem(
        dir.path(),
        r#"{"schema": "ostop.problem.v1", "diffusion": {"family": "brownian", "alpha": 1},
            "reward": {"kind": "polynomial", "coefficients": [-1]}}"#,
    );
    assert_eq!(run(&["solve", "--config", degenerate.to_str().unwrap()]).status.code(), Some(2));

    let starved = write_problem(
        dir.path(),
        r#"{"schema": "ostop.problem.v1", "diffusion": {"family": "brownian", "alpha": 1.5},
            "reward": {"kind": "polynomial", "coefficients": [0, -4, 0, 5, 0, -1]},
            "solver": {"max_enlarge_iters": 1}}"#,
    );
    assert_eq!(run(&["solve", "--config", starved.to_str().unwrap()]).status.code(), Some(3));

    let out = run(&["solve", "--config", config("quintic_alpha2.json").to_str().unwrap(), "--window", "3", "-3"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn window_flag_is_accepted() {
    let out = run(&["solve", "--config", config("quintic_alpha2.json").to_str().unwrap(), "--window", "-8", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["continuation"].as_array().unwrap().len(), 3);
}
