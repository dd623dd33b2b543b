use std::path::Path;
use std::process::{Command, Output};

use framesched::presets;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_framesched"));
    c.env_remove("FRAMESCHED_OUT_DIR");
    c
}

fn write_config(dir: &Path, name: &str, json: String) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_writes_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sys.json", presets::mm1_two_class([1.25, 1.25]).to_json());
    let out = dir.path().join("run");
    let stdout = ok(bin()
        .args([
            "simulate",
            "--config",
            &cfg,
            "--policy",
            "delayfeas",
            "--frames",
            "200",
            "--reps",
            "2",
            "--seed",
            "3",
        ])
        .arg("--out")
        .arg(&out)
        .arg("--trace")
        .output()
        .unwrap());
    assert!(stdout.contains("W1 ="));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# framesched-summary v1"));
    assert!(out.join("frames_3.csv").exists());
    assert!(out.join("queues_4.csv").exists());
    assert!(!out.join("frames_5.csv").exists());
}

#[test]
fn environment_overrides_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sys.json", presets::mm1_two_class([1.25, 1.25]).to_json());
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    ok(bin()
        .env("FRAMESCHED_OUT_DIR", &env)
        .args([
            "simulate",
            "--config",
            &cfg,
            "--policy",
            "fixed-order",
            "--frames",
            "50",
            "--reps",
            "1",
        ])
        .arg("--out")
        .arg(&flag)
        .output()
        .unwrap());
    assert!(env.join("summary.csv").exists());
    assert!(!flag.exists());
}

#[test]
fn simulation_is_reproducible_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sys.json", presets::mm1_fairness(10.0).to_json());
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        ok(bin()
            .args([
                "simulate",
                "--config",
                &cfg,
                "--policy",
                "delayfair",
                "--frames",
                "300",
                "--reps",
                "2",
                "--seed",
                "9",
            ])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap());
        std::fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn unknown_policy_is_rejected() {
    let out = bin()
        .args(["simulate", "--config", "x.json", "--policy", "nope"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown policy"));
}

#[test]
fn missing_config_fails_cleanly() {
    let out = bin()
        .args(["oracle", "power", "--config", "/nonexistent/sys.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn scenario_run_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "sys.json", presets::mm1_two_class([1.25, 1.25]).to_json());
    let sc = write_config(
        dir.path(),
        "sweep.json",
        r#"{"name": "sweep", "config": "sys.json", "policy": "delayfeas",
            "constraint_sets": [[0.45, 2.05], [2.05, 0.45]], "frames": 200, "replications": 2, "seed_base": 5}"#
            .to_string(),
    );
    let out = dir.path().join("res");
    let stdout = ok(bin()
        .args(["scenario", "run", &sc, "--out"])
        .arg(&out)
        .output()
        .unwrap());
    assert!(stdout.contains("scenario sweep (delayfeas)"));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# framesched-scenario v1"));
    assert_eq!(csv.lines().count(), 2 + 1 + 2);
}

#[test]
fn oracle_penalty_reports_fair_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sys.json", presets::mm1_fairness(1.0).to_json());
    let stdout = ok(bin().args(["oracle", "penalty", "--config", &cfg]).output().unwrap());
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["penalty"].as_f64().unwrap() - 2.304).abs() < 1e-6);
    assert!((v["delays"][0].as_f64().unwrap() - 1.92).abs() < 1e-6);
}

#[test]
fn oracle_power_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut sys = presets::power_two_class_affine().with_bounds(&[0.3, 0.3]);
    let cfg = write_config(dir.path(), "sys.json", sys.to_json());
    let stdout = ok(bin().args(["oracle", "power", "--config", &cfg]).output().unwrap());
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let p = v["average_power"].as_f64().unwrap();
    assert!(p > 3.0 && p < 60.0 / 14.0, "{p}");

    sys.p_const = Some(3.5);
    let cfg = write_config(dir.path(), "budget.json", sys.to_json());
    let stdout = ok(bin()
        .args(["oracle", "penalty", "--config", &cfg, "--p-const", "3.5"])
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["average_power"].as_f64().unwrap() <= 3.5 + 1e-9);

    let tight = presets::power_two_class().with_bounds(&[0.01, 0.01]);
    let cfg = write_config(dir.path(), "tight.json", tight.to_json());
    let out = bin().args(["oracle", "power", "--config", &cfg]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}
