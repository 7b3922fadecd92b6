use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinhall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinhall")).args(args).output().expect("spawn spinhall")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SHORT: &str = r#"{"integration": {"t_end": 4, "sample_stride": 0.5}}"#;

#[test]
fn print_defaults_round_trips() {
    let out = spinhall(&["print-defaults"]);
    assert!(out.status.success());
    let doc = String::from_utf8(out.stdout).unwrap();
    let parsed = spinhall::config::parse_config(&doc).unwrap();
    assert_eq!(parsed.beam.omega, 400.0);
    assert_eq!(parsed.integration.t_end, 20.0);
}

#[test]
fn run_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("out");
    let out = spinhall(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, spinhall::runner::TRAJECTORY_COLUMNS);
    assert_eq!(lines.count(), 9);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report.is_object());
}

#[test]
fn fixed_step_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        let out = spinhall(&["spinhall", "--config", &cfg, "--out", d.to_str().unwrap(), "--fixed-step", "0.01"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(fs::read(d.join("sep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn geodesic_and_riccati_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"integration": {"t_end": 2, "sample_stride": 0.5}, "output": {"format": "json"}}"#);
    for (cmd, file, cols) in [("geodesic", "geodesic.json", 8), ("riccati", "riccati.json", 15)] {
        let d = dir.path().join(cmd);
        let out = spinhall(&[cmd, "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join(file)).unwrap()).unwrap();
        assert_eq!(v["columns"].as_array().unwrap().len(), cols, "{cmd}");
        assert_eq!(v["rows"].as_array().unwrap().len(), 5, "{cmd}");
    }
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"beam": {"omgea": 3}}"#);
    let out = spinhall(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omgea"));

    let out = spinhall(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn verify_riccati_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinhall(&["verify", "--what", "riccati", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["all_pass"], serde_json::Value::Bool(true));
}
