use std::path::Path;
use std::process::{Command, Output};

use autogst::cli::{EXIT_CONFIG, EXIT_DIMENSION, EXIT_IO, EXIT_OK, EXIT_UNKNOWN_MODEL, EXIT_USAGE};

fn autogst(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autogst"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gst_writes_requested_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = autogst(&["gst", "--nev", "3"], &out);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("triplets.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next(), Some("index,sigma,residual"));
    let sigmas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(sigmas.len(), 3);
    assert!(sigmas.windows(2).all(|w| w[0] >= w[1]));
    for i in 0..3 {
        assert!(out.join(format!("vector_{i}.csv")).exists());
    }
    assert!(out.join("run.json").exists());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = autogst(&["gst", "--model", "heat", "--nev", "2", "--seed", "5"], out);
        assert_eq!(code(&o), EXIT_OK);
    }
    for name in ["triplets.csv", "vector_0.csv", "vector_1.csv", "left_vector_0.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn seed_and_hash_head_every_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = autogst(&["forward", "--model", "scalar_ode", "--seed", "17"], &out);
    assert_eq!(code(&o), EXIT_OK);
    for name in ["states.csv", "output.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# config_hash=") && first.ends_with(", seed=17"), "{first}");
    }
}

#[test]
fn growth_reads_a_vector_written_by_gst() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&autogst(&["gst", "--model", "heat", "--nev", "1"], &out)), EXIT_OK);
    let v = out.join("vector_0.csv");
    let o = autogst(&["growth", "--model", "heat", "--vector", v.to_str().unwrap()], &out);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("growth_curve.csv")).unwrap();
    // header comment, column names, t = 0 and one row per step
    assert_eq!(text.lines().count(), 2 + 1 + 10);
}

#[test]
fn vector_for_another_mesh_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&autogst(&["gst", "--model", "identity", "--nev", "1"], &out)), EXIT_OK);
    let v = out.join("vector_0.csv");
    let o = autogst(&["growth", "--model", "heat", "--vector", v.to_str().unwrap()], &out);
    assert_eq!(code(&o), EXIT_DIMENSION);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "model": {"kind": "burgers", "n_cells": "thirty"}}"#,
    );
    let o = autogst(&["forward", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(code(&o), EXIT_CONFIG);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.n_cells"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "lanczos": {"nev": 2, "ncv_extra": 3}}"#);
    let o = autogst(&["gst", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ncv_extra"));
}

#[test]
fn unknown_model_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = autogst(&["forward", "--model", "navier_stokes"], &dir.path().join("out"));
    assert_eq!(code(&o), EXIT_UNKNOWN_MODEL);
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "model": {"kind": "kdv"}}"#);
    let o = autogst(&["forward", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(code(&o), EXIT_UNKNOWN_MODEL);
}

#[test]
fn bad_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&autogst(&["gst", "--nev", "many"], dir.path())), EXIT_USAGE);
    assert_eq!(code(&autogst(&["transmogrify"], dir.path())), EXIT_USAGE);
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = autogst(&["forward", "--config", missing.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), EXIT_IO);
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = autogst(&["--show-config", "--model", "cahn_hilliard", "--seed", "3"], dir.path());
    assert_eq!(code(&o), EXIT_OK);
    let shown = String::from_utf8(o.stdout).unwrap();
    let config = autogst::Config::from_json(&shown).unwrap();
    assert_eq!(config.seed, 3);
    assert!(shown.contains("\"kind\": \"cahn_hilliard\""));
}

#[test]
fn verify_passes_on_a_small_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = autogst(&["verify", "--model", "heat"], &out);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}
