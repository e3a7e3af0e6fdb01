use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn condtest(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condtest"))
        .current_dir(dir)
        .env_remove("CONDTEST_SEED")
        .env_remove("CONDTEST_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const PIPELINE: &str = r#"{
  "schema_version": 1,
  "input_kernel": { "family": "gaussian", "bandwidth": 0.25 },
  "output_kernel": { "family": "linear_inhomogeneous", "offset": 1.0 },
  "lambda": 0.1,
  "alpha": 0.05,
  "calibration": { "method": "naive", "replicates": 50 }
}"#;

const CALIBRATE: &str = r#"{
  "schema_version": 1,
  "input_kernel": { "family": "gaussian", "bandwidth": 0.25 },
  "output_kernel": { "family": "linear_inhomogeneous", "offset": 1.0 },
  "lambda": 0.1,
  "alpha": 0.05,
  "replicates": 40
}"#;

const SIMULATE: &str = r#"{ "schema_version": 1, "dim": 2, "noise_std": 0.05, "steps": 30, "trajectories": 2 }"#;

fn simulated(dir: &Path) -> PathBuf {
    let cfg = write(dir, "simulate.json", SIMULATE);
    let out = condtest(dir, &["--seed", "4", "--config", cfg.to_str().unwrap(), "--out", "sim", "simulate"]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir.join("sim/transitions.csv")
}

#[test]
fn simulate_writes_header_and_pairs() {
    let dir = TempDir::new().unwrap();
    let data = simulated(dir.path());
    let text = fs::read_to_string(data).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_1,x_2,z_1,z_2"));
    assert_eq!(lines.count(), 60);
    let system = json(&dir.path().join("sim/system.json"));
    assert_eq!(system["a"].as_array().unwrap().len(), 2);
}

#[test]
fn identical_inputs_give_empty_region() {
    let dir = TempDir::new().unwrap();
    let data = simulated(dir.path());
    let cfg = write(dir.path(), "test.json", PIPELINE);
    let d = data.to_str().unwrap();
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "test", d, d]);
    assert!(out.status.success(), "{}", stderr(&out));
    let region = json(&dir.path().join("region.json"));
    assert_eq!(region["rejections"], 0);
    assert_eq!(region["rejection_region"].as_array().unwrap().len(), 0);
    assert_eq!(region["tested"], 120);
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("x_1,x_2,statistic,sigma1,sigma2,threshold,ratio,reject"));
}

#[test]
fn wild_calibration_factorizes_once() {
    let dir = TempDir::new().unwrap();
    let data = simulated(dir.path());
    let cfg = write(dir.path(), "calibrate.json", CALIBRATE);
    let mut counts = Vec::new();
    for method in ["wild", "naive"] {
        let out = condtest(
            dir.path(),
            &["--config", cfg.to_str().unwrap(), "--out", method, "calibrate", "--method", method, data.to_str().unwrap()],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let res = json(&dir.path().join(method).join("calibration.json"));
        assert_eq!(res["result"]["replicate_stats"].as_array().unwrap().len(), 40);
        assert!(res["result"]["beta"].as_f64().unwrap() > 0.0);
        counts.push(res["result"]["factorizations"].as_u64().unwrap());
    }
    assert_eq!(counts, vec![1, 80]);
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn fixed_seed_outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = simulated(dir.path());
    let other = write(
        dir.path(),
        "other.csv",
        &fs::read_to_string(&data).unwrap().replace("0.", "0.0"),
    );
    let pipeline = write(dir.path(), "test.json", PIPELINE);
    let monitor = write(
        dir.path(),
        "monitor.json",
        r#"{ "schema_version": 1, "dim": 2, "noise_std": 0.01, "reference_length": 60, "reference_trajectories": 2,
             "window": 10, "change_step": 30, "steps": 45, "xi": 2.0, "lambda": 0.01, "alpha": 0.05,
             "replicates": 20, "reference_grid": 30 }"#,
    );
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let o = out_dir.to_str().unwrap();
        let out = condtest(
            dir.path(),
            &["--seed", "11", "--config", pipeline.to_str().unwrap(), "--out", o, "test", data.to_str().unwrap(), other.to_str().unwrap()],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let out = condtest(dir.path(), &["--seed", "11", "--config", monitor.to_str().unwrap(), "--out", o, "monitor"]);
        assert!(out.status.success(), "{}", stderr(&out));
        runs.push(read_all(&out_dir));
    }
    assert_eq!(runs[0].len(), 4);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_is_read_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "simulate.json", SIMULATE);
    let c = cfg.to_str().unwrap();
    assert!(condtest(dir.path(), &["--config", c, "--seed", "9", "--out", "flag", "simulate"]).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_condtest"))
        .current_dir(dir.path())
        .env("CONDTEST_SEED", "9")
        .args(["--config", c, "--out", "env", "simulate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read_all(&dir.path().join("flag")), read_all(&dir.path().join("env")));
}

#[test]
fn malformed_csv_reports_line_number() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "calibrate.json", CALIBRATE);
    let bad = write(dir.path(), "bad.csv", "x_1,z_1\n0.1,0.2\n0.3,0.4\n0.5,oops\n");
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "calibrate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.csv:4:"), "{err}");
    assert!(err.contains("oops"), "{err}");
    assert!(!dir.path().join("calibration.json").exists());

    let ragged = write(dir.path(), "ragged.csv", "x_1,z_1\n0.1,0.2\n0.3\n");
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "calibrate", ragged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ragged.csv:3:"), "{}", stderr(&out));
}

#[test]
fn config_problems_are_listed_together() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "d.csv", "x_1,z_1\n0.1,0.2\n0.3,0.4\n");
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{
          "schema_version": 1,
          "input_kernel": { "family": "gaussian", "bandwidth": 0.25 },
          "output_kernel": { "family": "linear_inhomogeneous", "offset": 1.0 },
          "lambda": -1.0,
          "alpha": 1.5,
          "calibration": { "method": "naive", "replicates": 0 }
        }"#,
    );
    let d = data.to_str().unwrap();
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "test", d, d]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("3 problem(s)"), "{err}");
    assert!(err.contains("lambda") && err.contains("alpha") && err.contains("replicate"), "{err}");
    assert!(!dir.path().join("report.csv").exists());
}

#[test]
fn schema_version_is_required() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{ "dim": 2, "noise_std": 0.1, "steps": 5 }"#);
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("schema_version"), "{}", stderr(&out));
    let cfg = write(dir.path(), "v.json", r#"{ "schema_version": 7, "dim": 2, "noise_std": 0.1, "steps": 5 }"#);
    let out = condtest(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_and_bad_arguments_fail() {
    let dir = TempDir::new().unwrap();
    let out = condtest(dir.path(), &["sweep"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"));
    assert_eq!(condtest(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(condtest(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_curve_tables() {
    let dir = TempDir::new().unwrap();
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sweep_level.json");
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(base).unwrap()).unwrap();
    cfg["trials"] = 2.into();
    cfg["draws"] = 2.into();
    cfg["n"] = 20.into();
    cfg["pipeline"]["calibration"]["replicates"] = 20.into();
    let path = write(dir.path(), "sweep.json", &cfg.to_string());
    let out = condtest(dir.path(), &["--config", path.to_str().unwrap(), "sweep"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("parameter,value,alpha,mean_positive_rate,q025,q975,mean_error,draws"));
    assert_eq!(lines.count(), 5);
    let rows = fs::read_to_string(dir.path().join("sweep_rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 5 * 2);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).unwrap();
        let problems = if name.starts_with("sweep") {
            condtest::harness::io::parse_config::<condtest::harness::SweepConfig>(&name, &text).unwrap().problems()
        } else if name == "monitor.json" {
            condtest::harness::io::parse_config::<condtest::harness::MonitorConfig>(&name, &text).unwrap().problems()
        } else if name == "simulate.json" {
            condtest::harness::io::parse_config::<condtest::harness::SimulateConfig>(&name, &text).unwrap().problems()
        } else if name == "calibrate.json" {
            condtest::harness::io::parse_config::<condtest::harness::CalibrateConfig>(&name, &text).unwrap().problems()
        } else {
            condtest::harness::io::parse_config::<condtest::testing::Pipeline>(&name, &text).unwrap().problems()
        };
        assert!(problems.is_empty(), "{name}: {problems:?}");
        seen += 1;
    }
    assert!(seen >= 6);
}
