use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pairsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) {
    std::fs::write(dir.join("config.json"), json).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const DEFAULT: &str = r#"{"N": 3, "epsilon": [0.8, 1.0, 1.2], "V": 0.3}"#;

fn subspace_one(report: &Value) -> &Value {
    report["recovered_levels"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["subspace"] == 1)
        .expect("subspace 1 recovered")
}

#[test]
fn run_recovers_the_single_excitation_gap() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), DEFAULT);
    let out = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("o/report.json"));
    let gap = subspace_one(&report)["gap"].as_f64().unwrap();
    assert!((gap - 0.829150).abs() < 1e-5, "gap {gap}");

    let csv = std::fs::read_to_string(dir.path().join("o/pairing_spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("omega,magnitude,re,im"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn minimal_config_is_filled_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), DEFAULT);
    let out = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o"]);
    assert!(out.status.success());
    let config = &read_json(&dir.path().join("o/report.json"))["config"];
    assert_eq!(config["sweep"]["n_tau"], 256);
    assert_eq!(config["initial_state"], "proposal");
    assert_eq!(config["readout"]["mode"], "oracle");
    assert_eq!(config["nmr"]["larmor"], serde_json::json!([100.0, 150.0, 200.0]));
    assert!(config["sweep"]["delta_tau"].as_f64().unwrap() > 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), DEFAULT);
    for out in ["a", "b"] {
        assert!(pairsim(dir.path(), &["run", "--config", "config.json", "--out", out]).status.success());
    }
    for file in ["report.json", "pairing_spectrum.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
    let sequential = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "c", "--sequential"]);
    assert!(sequential.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a/report.json")).unwrap(),
        std::fs::read(dir.path().join("c/report.json")).unwrap()
    );
}

#[test]
fn undersampled_grid_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"N": 3, "epsilon": [0.8, 1.0, 1.2], "V": 0.3, "sweep": {"delta_tau": 2.0}}"#);
    let out = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o/report.json").exists());
}

#[test]
fn ambiguity_exits_with_code_3_only_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"N": 3, "epsilon": [1.0, 1.01, 1.2], "V": 0.01, "sweep": {"n_tau": 16}}"#);
    let strict = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o", "--strict"]);
    assert_eq!(strict.status.code(), Some(3));
    let lenient = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o"]);
    assert!(lenient.status.success());
    let report = std::fs::read_to_string(dir.path().join("o/report.json")).unwrap();
    assert!(report.contains("\"ambiguous\": true"));
}

#[test]
fn bad_epsilon_length_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"N": 3, "epsilon": [0.8, 1.0], "V": 0.3}"#);
    let out = pairsim(dir.path(), &["spectrum", "--config", "config.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"N": 2, "epsilon": [1.0, 1.0], "V": 0.3, "sweep": {"n_taus": 8}}"#);
    let out = pairsim(dir.path(), &["run", "--config", "config.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.n_taus"));
}

#[test]
fn sweep_then_secondft_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), DEFAULT);
    assert!(pairsim(dir.path(), &["sweep", "--config", "config.json", "--out", "s"]).status.success());
    assert!(dir.path().join("s/sweep.json").exists());
    let second = pairsim(dir.path(), &["secondft", "--out", "s"]);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    assert!(pairsim(dir.path(), &["run", "--config", "config.json", "--out", "r"]).status.success());
    let a = read_json(&dir.path().join("s/report.json"));
    let b = read_json(&dir.path().join("r/report.json"));
    assert_eq!(a["recovered_levels"], b["recovered_levels"]);
}

#[test]
fn fid_readout_and_trotter_recover_the_same_levels() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), DEFAULT);
    let out = pairsim(
        dir.path(),
        &["sweep", "--config", "config.json", "--out", "f", "--readout", "fid", "--evolution", "trotter", "--trotter-steps", "32"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fid = std::fs::read_to_string(dir.path().join("f/fid/tau_000_fid.csv")).unwrap();
    assert_eq!(fid.lines().next(), Some("t_or_omega,re,im"));
    assert!(pairsim(dir.path(), &["secondft", "--out", "f"]).status.success());
    let report = read_json(&dir.path().join("f/report.json"));
    let levels: Vec<f64> = subspace_one(&report)["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    // exact S_1 levels; 32 slices per increment keep the product-formula shift small
    for exact in [-1.129150, -0.300000, -0.070850] {
        assert!(levels.iter().any(|l| (l - exact).abs() < 5e-3), "{exact} not in {levels:?}");
    }
}

#[test]
fn gap_and_spectrum_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"N": 4, "epsilon": [0.7, 0.9, 1.1, 1.3], "V": 0.4}"#);
    assert!(pairsim(dir.path(), &["gap", "--config", "config.json", "--out", "o"]).status.success());
    let gap = read_json(&dir.path().join("o/gap.json"));
    assert!(gap.to_string().contains("rel_dev"));
    let spectrum = pairsim(dir.path(), &["spectrum", "--config", "config.json", "--out", "o"]);
    assert!(spectrum.status.success());
    assert_eq!(String::from_utf8_lossy(&spectrum.stdout).lines().count(), 16);
}

#[test]
fn validate_runs_without_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = pairsim(dir.path(), &["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains(" 0 failed"));
}
