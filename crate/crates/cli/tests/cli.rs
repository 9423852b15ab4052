use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tdh_core::circuit::{simulate_transient_with, Board, OscillatorCircuit, SimOptions};
use tdh_core::signature::load_map;
use tdh_core::spectral::{compute_spectrum_with, find_fundamental, SpectrumOptions, Window, DEFAULT_NOISE_FLOOR, DEFAULT_SPAN};

fn tdh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdh"))
        .current_dir(dir)
        .env("TDH_NUM_WORKERS", "2")
        .args(args)
        .output()
        .expect("spawning tdh")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tdh(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn sweep_from(dir: &Path, out: &str, start: &str, extra: &[&str], seed: &str) {
    let mut args = vec!["sweep", "--out", out, "--seed", seed, "--bias-start", start, "--bias-stop", "0.26"];
    args.extend_from_slice(&["--bias-step", "0.02", "--points", "401", "--duration", "1.2e-6"]);
    args.extend_from_slice(extra);
    ok(dir, &args);
}

fn sweep_into(dir: &Path, out: &str, extra: &[&str], seed: &str) {
    sweep_from(dir, out, "0.10", extra, seed);
}

#[test]
fn simulate_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["simulate", "--board", "board1", "--bias", "0.2", "--seed", "5", "--out", "run"]);
    assert!(stdout.starts_with("SteadyOscillation"), "{stdout}");
    let report = read_json(&dir.path().join("run/report.json"));
    assert_eq!(report["seed"], 5);
    assert!(report["config_hash"].as_str().is_some_and(|h| !h.is_empty()));

    let c = OscillatorCircuit::preset(Board::Board1).with_bias(0.2);
    let trace = simulate_transient_with(&c, 2e-6, 5, &SimOptions::default()).unwrap();
    let opts = SpectrumOptions { window: Window::Hann, load_resistance: c.load_resistance, span: DEFAULT_SPAN };
    let (f, p) = find_fundamental(&compute_spectrum_with(&trace, &opts).unwrap(), DEFAULT_NOISE_FLOOR).unwrap();
    assert_eq!(report["fundamental_hz"].as_f64().unwrap(), f);
    assert_eq!(report["fundamental_dbm"].as_f64().unwrap(), p);
    for name in ["trace.csv", "spectrum.csv", "harmonics.json"] {
        assert!(dir.path().join("run").join(name).exists(), "{name}");
    }
    let trace_csv = std::fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    assert!(trace_csv.starts_with("# config_hash="));
}

#[test]
fn low_bias_is_quiescent() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["simulate", "--bias", "0.05", "--out", "q"]);
    assert!(stdout.starts_with("Quiescent"), "{stdout}");
    let report = read_json(&dir.path().join("q/report.json"));
    assert!(report["fundamental_hz"].is_null());
}

#[test]
fn out_of_range_bias_is_rejected_with_the_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdh(dir.path(), &["simulate", "--bias", "0.9", "--out", "bad"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.bias"));
}

#[test]
fn sweep_sub_range_rows_match_the_full_sweep() {
    let dir = tempfile::tempdir().unwrap();
    sweep_into(dir.path(), "full", &["--board", "board2"], "11");
    sweep_from(dir.path(), "part", "0.18", &["--board", "board2"], "11");
    let full = load_map(dir.path().join("full/map.json")).unwrap();
    let part = load_map(dir.path().join("part/map.json")).unwrap();
    let offset = full.bias_grid.iter().position(|&v| (v - 0.18).abs() < 1e-9).unwrap();
    assert_eq!(part.power_matrix[..], full.power_matrix[offset..offset + part.rows()]);
    assert!(dir.path().join("full/colormap.csv").exists());
    assert!(dir.path().join("full/fundamental.csv").exists());
}

#[test]
fn identify_against_missing_database_fails() {
    let dir = tempfile::tempdir().unwrap();
    sweep_into(dir.path(), "m", &[], "1");
    let out = tdh(dir.path(), &["fingerprint", "identify", "--db", "none.json", "m/map.json"]);
    assert!(!out.status.success());
}

#[test]
fn enroll_identify_and_tamper_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for s in 0..3 {
        sweep_into(d, &format!("e{s}"), &["--board", "board3"], &(300 + s).to_string());
    }
    ok(d, &["fingerprint", "enroll", "--db", "db.json", "--id", "board3", "e0/map.json", "e1/map.json", "e2/map.json"]);
    sweep_into(d, "again", &["--board", "board3"], "399");
    let stdout = ok(d, &["fingerprint", "identify", "--db", "db.json", "--out", "id", "again/map.json"]);
    assert!(stdout.starts_with("known: board3"), "{stdout}");

    // A board with a swapped diode: junction capacitance up by a fifth.
    let mut altered = OscillatorCircuit::preset(Board::Board3);
    altered.diode.junction_capacitance *= 1.2;
    let config = serde_json::json!({ "circuit": altered });
    std::fs::write(d.join("altered.json"), config.to_string()).unwrap();
    sweep_into(d, "altered", &["--config", "altered.json"], "399");
    let stdout = ok(d, &["fingerprint", "tamper", "--db", "db.json", "--id", "board3", "--out", "t", "altered/map.json"]);
    assert!(stdout.contains("FLAGGED"), "{stdout}");
    assert_eq!(read_json(&d.join("t/tamper_report.json"))["flagged"], true);

    let stdout = ok(d, &["fingerprint", "tamper", "--db", "db.json", "--id", "board3", "--out", "t", "again/map.json"]);
    assert!(!stdout.contains("FLAGGED"), "{stdout}");
    assert!(!tdh(d, &["fingerprint", "tamper", "--db", "db.json", "--id", "board9", "again/map.json"]).status.success());
}

#[test]
fn link_budget_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["linkbudget", "--out", "lb"]);
    let summary = read_json(&dir.path().join("lb/link_summary.json"));
    assert!(summary["reverse_ranges"][0]["range_m"].as_f64().unwrap() > 50.0);
    let forward = summary["forward_range_m"].as_f64().unwrap();
    assert!((forward / 2.74 - 1.0).abs() < 0.15, "{forward}");
    for name in ["forward_curve.csv", "reverse_curve.csv"] {
        assert!(dir.path().join("lb").join(name).exists());
    }
}

#[test]
fn toml_and_json_configs_are_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "board = \"board4\"\nseed = 7\n[simulation]\nbias = 0.17\n[link]\ncurve_points = 5\n")
        .unwrap();
    std::fs::write(
        d.join("run.json"),
        r#"{"board": "board4", "seed": 7, "simulation": {"bias": 0.17}, "link": {"curve_points": 5}}"#,
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "export", "config", "--out", "x"]);
    let from_toml = std::fs::read(d.join("x/config.toml")).unwrap();
    ok(d, &["--config", "run.json", "export", "config", "--out", "x"]);
    assert_eq!(from_toml, std::fs::read(d.join("x/config.toml")).unwrap());

    std::fs::write(d.join("typo.json"), r#"{"simulation": {"bias_v": 0.2}}"#).unwrap();
    let out = tdh(d, &["--config", "typo.json", "export", "config"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bias_v"));
}

#[test]
fn exports_iv_and_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["export", "iv", "--points", "11", "--out", "x"]);
    let iv = std::fs::read_to_string(d.join("x/iv.csv")).unwrap();
    assert_eq!(iv.lines().count(), 1 + 1 + 11);
    sweep_into(d, "m", &[], "2");
    ok(d, &["export", "features", "--out", "x", "m/map.json"]);
    assert!(read_json(&d.join("x/features.json"))["values"].is_array());
    assert!(!tdh(d, &["export", "iv", "--points", "1"]).status.success());
}
