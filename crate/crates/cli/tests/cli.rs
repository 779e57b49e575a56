use std::path::Path;
use std::process::Command;

use gppopf_cli::artifacts::INCOMPLETE;
use gppopf_cli::{predict_only, run_experiment, ExperimentConfig, ExperimentReport};

fn small(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"name": "{name}", "case_path": "builtin:case14", "renewable_buses": [7, 9, 14],
            "penetration_target": 10.42, "load_fraction": 0.1, "renewable_fraction": 1.0,
            "n_train": 24, "n_test": 60, "seed": 5, "gp": {{"restarts": 2}}}}"#
    ))
    .unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gppopf"))
}

fn report(dir: &Path) -> ExperimentReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_every_artifact_and_clears_the_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small("artifacts"), dir.path()).unwrap();
    for f in [
        "report.json",
        "timings.json",
        "training_inputs.csv",
        "training_outputs.csv",
        "test_inputs.csv",
        "gp_mean.csv",
        "gp_variance.csv",
        "mcs_outputs.csv",
        "l1_errors.csv",
        "hist_l1_pg.csv",
        "hist_l1_vm.csv",
        "sensitivity.csv",
        "models/manifest.json",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    assert!(!dir.path().join(INCOMPLETE).exists());
    assert_eq!(report(dir.path()), out.report);
    let rows = std::fs::read_to_string(dir.path().join("mcs_outputs.csv")).unwrap();
    assert_eq!(rows.lines().count(), 61);
    assert_eq!(
        rows.lines().next().unwrap().split(',').count(),
        out.report.scenario.n_outputs
    );
}

#[test]
fn failed_run_leaves_the_marker_with_the_cause() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("fails");
    cfg.case_path = "builtin:no_such_case".into();
    assert!(run_experiment(&cfg, dir.path()).is_err());
    let marker = std::fs::read_to_string(dir.path().join(INCOMPLETE)).unwrap();
    assert!(marker.starts_with("failed:"), "{marker}");
}

#[test]
fn invalid_config_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n_train: 0,
        ..small("zero")
    };
    let err = run_experiment(&cfg, &dir.path().join("out")).unwrap_err();
    assert!(err.to_string().contains("n_train"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn tampered_models_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small("tamper"), dir.path()).unwrap();
    let models = dir.path().join("models");
    let name = std::fs::read_dir(&models)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .find(|n| n.starts_with("000_"))
        .unwrap();
    let p = models.join(name);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    v["y_mean"] = serde_json::Value::String(format!("{:016x}", 1234.5f64.to_bits()));
    std::fs::write(&p, v.to_string()).unwrap();
    let err = predict_only(&models, None, Some(10), None).unwrap_err();
    assert!(format!("{err:#}").contains("digest"), "{err:#}");
}

#[test]
fn missing_model_directory_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["predict", "--models"])
        .arg(dir.path().join("gone"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].is_string());
}

#[test]
fn binary_validates_and_solves_bundled_cases() {
    let o = bin().args(["validate-case", "builtin:case_ieee30"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["buses"], 30);

    let o = bin().args(["solve-opf", "builtin:case14"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], true);
    assert_eq!(v["pg"].as_array().unwrap().len(), 5);
}

#[test]
fn zero_jobs_rejected() {
    let o = bin()
        .args(["--jobs", "0", "validate-case", "builtin:case14"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn bundled_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["case14_load10", "case30_load05", "case30_load10"] {
        let cfg = ExperimentConfig::load(&dir.join(format!("{name}.json"))).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.name, name);
    }
}
