//! End-to-end tests of the `respike` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_respike"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("respike-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

/// Cheap config: coarse eps ladder, small replica counts.
const QUICK: &str = r#"{
  "eps": [1e-1, 3e-2, 1e-2],
  "beta": 0.35,
  "seed": 7,
  "replicas": 2000,
  "min_accepted": 300,
  "phi_replicas": 2000,
  "t": 1.0,
  "horizon": 6.0,
  "grid_n": 200,
  "rectangles": [
    {"s1": 0.0, "s2": 1.0, "a": 0.4, "b": 1.0},
    {"s1": 0.0, "s2": 0.5, "a": 0.3, "b": 0.5},
    {"s1": 0.5, "s2": 1.0, "a": 0.55, "b": 1.0}
  ]
}"#;

#[test]
fn validate_exit_codes() {
    let dir = tmp("validate");
    // valid default model
    let ok = bin().arg("validate").output().unwrap();
    assert!(ok.status.success());

    // f1 > 0 violates the admissibility conditions
    let bad = write_config(
        &dir,
        r#"{"model": {"family": "linear", "params": [1.0, 1.0, 1.0]}}"#,
    );
    let out = bin().arg("--config").arg(&bad).arg("validate").output().unwrap();
    assert!(!out.status.success());

    // malformed JSON: nonzero with a parse diagnostic
    let mangled = write_config(&dir, "{ not json");
    let out = bin()
        .arg("--config")
        .arg(&mangled)
        .arg("validate")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("malformed config"), "stderr: {err}");
}

#[test]
fn unknown_suite_is_usage_error() {
    let out = bin().args(["verify", "--suite", "nonsense"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("possible values"), "stderr: {err}");
}

#[test]
fn simulate_is_reproducible_and_truncates() {
    let dir = tmp("simulate");
    let cfg = write_config(&dir, QUICK);
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let st = bin()
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .arg("simulate")
            .status()
            .unwrap();
        assert!(st.success());
    }
    for file in ["pattern_eps1e-1.csv", "trajectory_eps1e-1.csv", "manifest.json"] {
        let a = fs::read(dir.join("a").join(file)).unwrap();
        let b = fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // pattern carries both spike and epoch rows at this horizon
    let pat = fs::read_to_string(dir.join("a").join("pattern_eps1e-2.csv")).unwrap();
    assert!(pat.lines().any(|l| l.starts_with("spike,")));
    assert!(pat.lines().any(|l| l.starts_with("e_odd,")));
    assert!(pat.lines().any(|l| l.starts_with("e_even,")));

    // horizon 0: header-only pattern
    let cfg0 = write_config(&dir.join("h0"), r#"{"horizon": 0.0, "eps": [1e-2]}"#);
    let st = bin()
        .arg("--config")
        .arg(&cfg0)
        .arg("--out")
        .arg(dir.join("h0out"))
        .arg("simulate")
        .status()
        .unwrap();
    assert!(st.success());
    let pat = fs::read_to_string(dir.join("h0out").join("pattern_eps1e-2.csv")).unwrap();
    let rows: Vec<&str> = pat.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["kind,t,x"]);
}

#[test]
fn verify_outputs_identical_across_thread_counts() {
    let dir = tmp("verify-det");
    let cfg = write_config(&dir, QUICK);
    for (run, threads) in [("t1", "1"), ("t2", "2"), ("t2b", "2")] {
        let st = bin()
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(run))
            .arg("--threads")
            .arg(threads)
            .arg("verify")
            .arg("--suite")
            .arg("e1")
            .status()
            .unwrap();
        // exit code reflects pass/fail of the KS ladder; both runs must agree
        let _ = st;
    }
    for file in ["reports.jsonl", "summary.csv", "e1_sweep.csv", "manifest.json"] {
        let a = fs::read(dir.join("t1").join(file)).unwrap();
        let b = fs::read(dir.join("t2").join(file)).unwrap();
        let c = fs::read(dir.join("t2b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across thread counts");
        assert_eq!(b, c, "{file} differs across reruns");
    }
}

#[test]
fn verify_then_report_round_trip() {
    let dir = tmp("report");
    let cfg = write_config(&dir, QUICK);
    let out_dir = dir.join("run");
    let verify = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .arg("verify")
        .arg("--suite")
        .arg("intensity-constant")
        .output()
        .unwrap();
    assert!(
        verify.status.success(),
        "stdout: {}",
        String::from_utf8_lossy(&verify.stdout)
    );
    let report = bin().arg("--out").arg(&out_dir).arg("report").output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("intensity-constant/discrimination"));

    // provenance: every artifact carries the config hash
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    let reports = fs::read_to_string(out_dir.join("reports.jsonl")).unwrap();
    let hash_line = reports.lines().next().unwrap();
    assert!(hash_line.starts_with("# config_sha256="));
    let hash = hash_line
        .trim_start_matches("# config_sha256=")
        .split_whitespace()
        .next()
        .unwrap();
    assert!(manifest.contains(hash));
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tmp("seed");
    let cfg = write_config(&dir, QUICK);
    for (run, seed) in [("s7", "7"), ("s8", "8")] {
        let st = bin()
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(run))
            .arg("--seed")
            .arg(seed)
            .arg("simulate")
            .status()
            .unwrap();
        assert!(st.success());
    }
    let a = fs::read(dir.join("s7").join("pattern_eps1e-2.csv")).unwrap();
    let b = fs::read(dir.join("s8").join("pattern_eps1e-2.csv")).unwrap();
    assert_ne!(a, b);
}
