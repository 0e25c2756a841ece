use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chaoslift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslift")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = chaoslift(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(args: &[&str]) -> (i32, Value) {
    let out = chaoslift(args);
    assert!(!out.status.success());
    (out.status.code().unwrap(), serde_json::from_slice(&out.stderr).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trace rows without the wall-clock column.
fn trace_without_seconds(file: &Path) -> Vec<String> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn gen_data_writes_dataset_and_lift() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let summary = ok_json(&["gen-data", "--m", "3", "--n-class", "4", "--variant", "lift_chaos", "--m-lift", "10", "--out", path(&out)]);
    assert_eq!(summary["rows"], 12);
    assert_eq!(summary["lifted"]["evolved"], true);
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 13);
    assert!(out.join("lifted.csv").exists() && out.join("manifest.json").exists());
}

#[test]
fn train_then_replay_with_other_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let summary = ok_json(&["train", "--m", "3", "--variant", "lift-chaos", "--m-lift", "10", "--epochs", "5", "--seed", "7", "--out", path(&a)]);
    assert_eq!(summary["epochs"], 5);
    ok_json(&["train", "--manifest", path(&a.join("manifest.json")), "--jobs", "1", "--out", path(&b)]);
    assert_eq!(trace_without_seconds(&a.join("trace.csv")), trace_without_seconds(&b.join("trace.csv")));
    assert_eq!(fs::read(a.join("weights.csv")).unwrap(), fs::read(b.join("weights.csv")).unwrap());

    let (code, err) = err_json(&["train", "--manifest", path(&a.join("manifest.json")), "--epochs", "9"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"]["kind"], "validation");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"m": 4, "n-class": 6, "variant": "lift", "lift_min": 10, "lift_max": 11, "epochs": 50}"#).unwrap();
    let summary = ok_json(&["sweep", "--config", path(&cfg), "--epochs", "2"]);
    assert_eq!(summary["cells"], 2);
    assert_eq!(summary["variant"], "lift");
    fs::write(&cfg, r#"{"m": 4, "bogus": 1}"#).unwrap();
    let (code, _) = err_json(&["sweep", "--config", path(&cfg)]);
    assert_eq!(code, 1);
}

#[test]
fn compare_reports_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok_json(&["compare", "--m", "3", "--n-class", "4", "--lift-max", "10", "--epochs", "3", "--out", path(dir.path())]);
    assert_eq!(summary["variants"].as_array().unwrap().len(), 3);
    for f in ["comparison.json", "timing.csv", "curves.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn select_interval_and_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let est = ok_json(&["select-interval", "--m", "4", "--lift-max", "12", "--t-len", "20", "--out", path(dir.path())]);
    let (lo, opt, hi) = (est["t_init"].as_f64().unwrap(), est["t_optimal"].as_f64().unwrap(), est["t_final"].as_f64().unwrap());
    assert!(lo <= opt && opt <= hi);
    assert_eq!(fs::read_to_string(dir.path().join("curve.csv")).unwrap().lines().count(), 21);

    let geo = ok_json(&["geometry", "--m", "3", "--out", path(dir.path())]);
    assert_eq!(geo["dimension"], 3);
    let d = geo["mean_centroid_distance"].as_f64().unwrap();
    assert!((d - 2f64.sqrt()).abs() < 0.05);
    assert!(dir.path().join("geometry").is_dir());
}

#[test]
fn bad_input_reports_json_error() {
    let (code, err) = err_json(&["train", "--m", "1"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"]["kind"], "validation");
    let (code, err) = err_json(&["train", "--m", "3", "--variant", "lift"]);
    assert_eq!(code, 1);
    assert!(err["error"]["message"].as_str().unwrap().contains("m-lift"));
    let (code, err) = err_json(&["train", "--no-such-flag"]);
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "usage");
}
