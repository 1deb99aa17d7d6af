use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobile-ude"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn preset(name: &str) -> Value {
    let out = cli(&["preset", name]);
    assert_eq!(code(&out), 0);
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_record_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("hold");
    cfg["clock"]["duration"] = 1.0.into();
    let path = write_json(dir.path(), "hold.json", &cfg);
    let out_dir = dir.path().join("out");
    let out = cli(&["run", &path, "--controller", "C4", "--seed", "7", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("hold_C4_seed7.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("t,"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("hold_C4_seed7.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
}

#[test]
fn diverging_run_exits_failed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("hold");
    cfg["clock"]["duration"] = 1.0.into();
    cfg["controller"]["impedance"]["stiffness"] = serde_json::json!(vec![1e9; 6]);
    cfg["controller"]["torque_limit"] = serde_json::json!(vec![1e12; 6]);
    let path = write_json(dir.path(), "bad.json", &cfg);
    let out = cli(&["run", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Failed"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"name": 3}"#).unwrap();
    assert_eq!(code(&cli(&["run", broken.to_str().unwrap(), "--out", d])), 2);
    assert_eq!(code(&cli(&["run", "no-such-preset", "--out", d])), 2);
    assert_eq!(code(&cli(&["run", "hold", "--controller", "C7", "--out", d])), 2);
    let mut cfg = preset("hold");
    cfg["clock"]["physics_dt"] = (-1.0).into();
    let path = write_json(dir.path(), "neg.json", &cfg);
    let out = cli(&["run", &path, "--out", d]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("physics_dt"));

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"scenarios": ["hold"], "controllers": ["C1", "C9"]}"#).unwrap();
    let out = cli(&["ablate", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("controllers[1]"));

    assert_eq!(code(&cli(&["frobnicate"])), 2);
    assert_eq!(code(&cli(&["report", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn ablate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "scenarios": ["hold"],
        "controllers": ["C1", "C4"],
        "repetitions": 2,
        "duration": 0.5,
        "output_dir": "results",
    });
    let path = write_json(dir.path(), "spec.json", &spec);
    let out = cli(&["ablate", &path]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    let summaries = std::fs::read_dir(&results)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".summary.json"))
        .count();
    assert_eq!(summaries, 4);

    let out = cli(&["report", results.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let table = std::fs::read_to_string(results.join("report.csv")).unwrap();
    assert!(table.contains("C1") && table.contains("C4"));
    assert!(results.join("report.txt").exists());
}

#[test]
fn filters_check_writes_responses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cli(&["filters-check", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["filters.csv", "gf1_step.csv", "gf1_frequency.csv", "gf2-w3_step.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // At the controller period the printed band-pass misses the tolerance.
    let out = cli(&["filters-check", "--out", d, "--sample-period", "0.008"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&cli(&["filters-check", "--out", d, "--sample-period", "0"])), 2);
}

#[test]
fn validate_coupling_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("coupling-validation");
    cfg["clock"]["duration"] = 6.0.into();
    let path = write_json(dir.path(), "cv.json", &cfg);
    let out = cli(&["validate-coupling", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let name = cfg["name"].as_str().unwrap();
    let summary = std::fs::read_to_string(dir.path().join(format!("{name}_coupling_summary.csv"))).unwrap();
    assert_eq!(summary.lines().count(), 7);
    assert!(dir.path().join(format!("{name}_coupling.csv")).exists());
}
