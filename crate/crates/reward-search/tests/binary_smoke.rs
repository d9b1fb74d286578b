//! Smoke tests for the `rsearch` binary itself: argument wiring, exit
//! codes, and file outputs.

use std::process::Command;

fn rsearch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rsearch"))
}

#[test]
fn calibrate_prints_prior_json() {
    let out = rsearch()
        .args(["calibrate", "--resolution", "12"])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("calibrate prints JSON");
    assert_eq!(doc["prior"]["m"].as_f64(), Some(0.0));
    assert!(doc["kl_from_uniform"].as_f64().unwrap() >= 0.0);
}

#[test]
fn calibrate_rejects_small_resolution_with_nonzero_exit() {
    let out = rsearch()
        .args(["calibrate", "--resolution", "9"])
        .output()
        .expect("binary runs");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution"));
}

#[test]
fn simulate_run_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    let out = rsearch()
        .args([
            "simulate",
            "--scenario",
            "1",
            "--branching",
            "3",
            "--depth",
            "3",
            "--fraction",
            "0.3",
            "--methods",
            "greedy@3,bon_last@2",
            "--seeds",
            "4",
            "--out",
            sim_out.to_str().unwrap(),
        ])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("greedy@3"), "report printed to stdout");
    assert!(sim_out.join("manifest.json").exists());
    assert!(sim_out.join("report.txt").exists());

    // A config-driven run into a second directory, then analyze it.
    let config = serde_json::json!({
        "methods": ["bon_last@2"],
        "environment": {
            "type": "synthetic",
            "scenario": "terminal_only",
            "branching": 3,
            "depth": 3,
            "fraction_correct_leaves": 0.3
        },
        "seeds": [0, 1, 2]
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let run_out = dir.path().join("run");
    let out = rsearch()
        .args([
            "run",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            run_out.to_str().unwrap(),
            "--workers",
            "2",
        ])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rsearch()
        .args(["analyze", "--out", run_out.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_out.join("correlation_by_distance.csv").exists());
    let csv = std::fs::read_to_string(run_out.join("correlation_by_distance.csv")).unwrap();
    assert!(csv.starts_with("distance_to_terminal,r_pb,n\n"));
}

#[test]
fn run_without_out_dir_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "methods": ["greedy@2"],
        "environment": {
            "type": "synthetic",
            "scenario": "value_exact",
            "branching": 2,
            "depth": 2,
            "fraction_correct_leaves": 0.5
        },
        "seeds": [0]
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let out = rsearch()
        .args(["run", "--config", config_path.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("output dir"));
}
