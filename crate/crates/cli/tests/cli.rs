use std::path::Path;
use std::process::Command;

fn rwre(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rwre")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.in.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SIMULATE: &str = r#"{
  "model": { "dim": 2, "range": 1, "master_seed": 0, "law": { "kind": "deterministic-ne" } },
  "seed": 5,
  "experiment": { "kind": "simulate", "n_paths": 50, "horizon": 2000, "expect_velocity": [0.5, 0.5] },
  "tolerances": { "velocity": 0.05 }
}"#;

#[test]
fn simulate_then_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE);
    let out = dir.path().join("run");
    let o = rwre(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("velocity[0]") && stdout.contains("PASS"));
    for f in ["records.jsonl", "summary.txt", "summary.json", "manifest.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = out.join("manifest.json");
    let o = rwre(&["reproduce", "--manifest", manifest.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = SIMULATE.replace("[0.5, 0.5]", "[0.9, 0.1]");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("run");
    let o = rwre(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn bad_config_exits_one_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SIMULATE.replace("\"horizon\": 2000", "\"horizon\": -1"));
    let o = rwre(&["simulate", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("experiment") && err.contains("-1"), "{err}");
}

#[test]
fn kind_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIMULATE);
    let o = rwre(&["kalikow", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn singular_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ne");
    let o = rwre(&["singular-ne", "--n-max", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("restriction_identity"));
}
