//! End-to-end runs of the `spheroidal` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spheroidal"))
        .args(args)
        .env("SPHEROIDAL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_an_envelope() {
    let out = run(&["solve", "--alpha", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["program"], "spheroidal");
    assert_eq!(v["command"], "solve");
    assert_eq!(v["config"]["alpha"], 1.0);
    assert_eq!(v["config"]["n"], 3);
    let t = v["result"]["t"].as_f64().unwrap();
    assert!((t - 0.135_182_423_087_628).abs() < 1e-10, "{t}");
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let report = dir.path().join("report.json");
    let out = run(&[
        "solve",
        "--n",
        "4",
        "--alpha",
        "-0.5",
        "--output",
        sol.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let out = run(&[
        "verify",
        "--solution",
        sol.to_str().unwrap(),
        "--interior-points",
        "500",
        "--z-points",
        "100",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = read_json(&report);
    assert_eq!(v["result"]["report"]["passed"], true);
    assert_eq!(v["result"]["solution"], read_json(&sol)["result"]);
}

#[test]
fn verify_fails_with_status_one_on_a_wrong_solution() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    run(&["solve", "--alpha", "0.5", "--output", sol.to_str().unwrap()]);
    let mut v = read_json(&sol);
    let t = v["result"]["t"].as_f64().unwrap();
    let b = v["result"]["b"].as_f64().unwrap();
    v["result"]["t"] = (1.1 * t).into();
    v["result"]["a"] = (b * (1.1 * t).sqrt()).into();
    std::fs::write(&sol, v.to_string()).unwrap();
    let out = run(&[
        "verify",
        "--solution",
        sol.to_str().unwrap(),
        "--interior-points",
        "300",
        "--z-points",
        "60",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["report"]["passed"], false);
    // an inconsistent record is rejected before any checking
    v["result"]["a"] = 1.0.into();
    std::fs::write(&sol, v.to_string()).unwrap();
    assert_eq!(
        run(&["verify", "--solution", sol.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_is_monotone_and_documented() {
    let out = run(&["sweep", "--steps", "6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# schema_version=1"));
    assert!(text.contains("# t_strictly_decreasing=true"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("alpha"))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    assert!((rows.last().unwrap()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn potential_map_has_header_and_grid() {
    let out = run(&[
        "potential-map",
        "--a",
        "0.8",
        "--b",
        "1.2",
        "--alpha",
        "0.5",
        "--steps",
        "5",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 1 + 25);
    assert!(data[0].starts_with("x1,"));
}

#[test]
fn limit_table_converges() {
    let v = json(&run(&["limit", "--eps", "1e-2,1e-3,1e-4"]));
    let diffs: Vec<f64> = v["result"]["table"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["abs_diff"].as_f64().unwrap())
        .collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]));
    assert!(
        (v["result"]["limit"]["t_star"].as_f64().unwrap() - 18.028_366_365_910_656).abs() < 1e-9
    );
}

#[test]
fn parseval_reports_a_small_gap() {
    let v = json(&run(&["parseval", "--alpha", "0.5", "--grid", "16"]));
    assert!(v["result"]["relative_gap"].as_f64().unwrap() < 1e-2);
    assert!(v["result"]["warning"].is_null());
}

#[test]
fn simulate_is_deterministic_and_writes_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("pts.csv");
    let args = [
        "simulate",
        "--alpha",
        "0.5",
        "--particles",
        "40",
        "--max-iterations",
        "200",
        "--snapshot",
        snap.to_str().unwrap(),
    ];
    let first = run(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let csv = std::fs::read_to_string(&snap).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 41);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["result"]["seed"], 42);
    assert!(v["result"]["final_energy"].as_f64() < v["result"]["initial_energy"].as_f64());
    assert!(v["result"]["fit"]["t_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(run(&["solve", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--n", "2"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--tol", "0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["verify", "--solution", "/nonexistent/x.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["simulate", "--alpha", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["limit", "--eps", "2"]).status.code(), Some(2));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_spheroidal"))
        .args(["solve"])
        .env("SPHEROIDAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&run(&["solve", "--alpha", "1.5"]).stderr).into_owned();
    assert!(msg.contains("alpha"), "{msg}");
}
