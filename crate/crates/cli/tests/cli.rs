use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wsrot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsrot"))
        .current_dir(dir)
        .env("WSROT_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("error JSON")
}

#[test]
fn fixed_point_defaults() {
    let dir = TempDir::new().unwrap();
    let out = wsrot(dir.path(), &["fixed-point"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["x"].as_f64().unwrap() - 0.759172143809357).abs() < 1e-9);
    let trace = v["eig"][0][0].as_f64().unwrap() + v["eig"][1][0].as_f64().unwrap();
    assert!((trace + 0.7).abs() < 1e-12);
}

#[test]
fn fixed_point_outside_region_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kappa":-0.5,"n":4}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "fixed-point"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["exit_code"], 4);
}

#[test]
fn unknown_key_reports_its_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kapa":-0.7,"n":4}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "fixed-point"]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["path"], "model.kapa");
}

#[test]
fn wrong_type_and_bad_json_exit_2() {
    let dir = TempDir::new().unwrap();
    let typed = write_config(dir.path(), "a.json", r#"{"integrator":{"dt":"small"}}"#);
    let out = wsrot(dir.path(), &["--config", &typed, "fixed-point"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["path"], "integrator.dt");

    let broken = write_config(dir.path(), "b.json", "{\"model\": ");
    let out = wsrot(dir.path(), &["--config", &broken, "fixed-point"]);
    assert_eq!(out.status.code(), Some(2));

    let out = wsrot(dir.path(), &["--config", "missing.json", "fixed-point"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_jobs_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = wsrot(dir.path(), &["--jobs", "0", "fixed-point"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_rotation_warns_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.0,"kappa":-1.25,"n":4}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "fixed-point"]);
    assert!(out.status.success());
    let w: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert!(w.get("warning").is_some());
}

#[test]
fn simulate_writes_outputs_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kappa":-0.7,"n":6},
            "simulate":{"t_end":10.0,"samples":11}}"#,
    );
    for run in ["a", "b"] {
        let out = wsrot(dir.path(), &["--config", &cfg, "--seed", "17", "--out", run, "simulate"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["trajectory.csv", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let csv = fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0].split(',').count(), 7);
    let summary: Value = serde_json::from_slice(&fs::read(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_units"], 6);
    assert!(summary["lambda_max_drift"].as_f64().unwrap() < 1e-8);

    let out = wsrot(dir.path(), &["--config", &cfg, "--seed", "18", "--out", "c", "simulate"]);
    assert!(out.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/trajectory.csv")).unwrap(),
        fs::read(dir.path().join("c/trajectory.csv")).unwrap()
    );
}

#[test]
fn splay_check_passes_for_ten_units() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kappa":-0.7,"n":10}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "--out", "sp", "splay-check"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("sp/splay.json")).unwrap()).unwrap();
    assert_eq!(v["is_splay"], true);
    assert_eq!(v["n_units"], 10);
    assert!(v["max_shift_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn invariants_filter_and_failures() {
    let dir = TempDir::new().unwrap();
    let out = wsrot(dir.path(), &["--filter", "mobius", "--out", "inv", "invariants"]);
    assert!(out.status.success());
    let rows: Value = serde_json::from_slice(&fs::read(dir.path().join("inv/invariants.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["module"] == "mobius" && r["passed"] == true));

    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"invariants":{"tolerances":{"mobius.group_identity":1e-30}}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "--filter", "mobius.group", "invariants"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert_eq!(stderr_json(&out)["error"], "checks_failed");

    let out = wsrot(dir.path(), &["--filter", "no_such_invariant", "invariants"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_scan_finds_the_midpoint_root() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scan":{"grid":{"min":0.3,"max":0.7,"points":5},
                    "curves":[{"name":"sin2","h":{"eps":0.001,"a":{"2":1.0}}}],
                    "samples":512}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "--out", "scan", "scan-fh"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("scan/fh_sin2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("scan/roots.json")).unwrap()).unwrap();
    let roots = v["curves"][0]["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    let at = roots[0]["lambda"].as_f64().unwrap();
    assert!((at - 0.5).abs() < 1e-6, "root at {at}");
}

#[test]
fn scan_rejects_bad_inputs() {
    let dir = TempDir::new().unwrap();
    let grid = write_config(dir.path(), "g.json", r#"{"scan":{"grid":{"min":0.0,"max":0.5,"points":5}}}"#);
    assert_eq!(wsrot(dir.path(), &["--config", &grid, "scan-fh"]).status.code(), Some(2));

    let name = write_config(
        dir.path(),
        "n.json",
        r#"{"scan":{"curves":[{"name":"../x","h":{"eps":0.001,"a":{"2":1.0}}}]}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &name, "scan-fh"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["path"], "scan.curves.name");

    let units = write_config(
        dir.path(),
        "u.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kappa":-0.7,"n":5}}"#,
    );
    assert_eq!(wsrot(dir.path(), &["--config", &units, "scan-fh"]).status.code(), Some(2));
}

#[test]
fn scan_outside_convergent_region_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model":{"kind":"classic_rotator","omega":0.8,"kappa":-0.5,"n":4},
            "scan":{"grid":{"min":0.4,"max":0.6,"points":2},
                    "curves":[{"name":"sin2","h":{"eps":0.001,"a":{"2":1.0}}}],
                    "samples":256}}"#,
    );
    let out = wsrot(dir.path(), &["--config", &cfg, "--out", "scan", "scan-fh"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "scan_incomplete");
}
