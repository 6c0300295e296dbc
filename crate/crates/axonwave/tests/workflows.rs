//! End-to-end workflow behaviors that the unit suites do not cover:
//! degenerate inputs, config echo round-trips, and binary exit codes.

use axonwave::config::RunConfig;
use axonwave::workflows;
use std::fs;
use std::path::Path;
use std::process::Command;

fn small_converge_json(name: &str, levels: usize) -> String {
    format!(
        r#"{{
            "workflow": "converge",
            "name": "{name}",
            "geometry": {{
                "z_len": 3.141592653589793,
                "r_inner": 1.0,
                "pml_start": 4.0,
                "r_outer": 5.0
            }},
            "materials": {{ "omega": 2.0, "mu": 1.0, "exterior": {{ "epsilon": 1.0 }} }},
            "mode": "tm",
            "chi0": 20.0,
            "mesh": {{ "nr": 20, "nz": 10, "levels": {levels} }}
        }}"#
    )
}

#[test]
fn single_level_reports_no_slope() {
    let config: RunConfig = serde_json::from_str(&small_converge_json("one-level", 1)).unwrap();
    let out = tempfile::tempdir().unwrap();
    let outcome = workflows::run_converge(&config, out.path()).unwrap();
    assert_eq!(outcome.levels.len(), 1);
    assert!(outcome.l2_slope.is_none());
    assert!(outcome.h1_slope.is_none());
    let table = fs::read_to_string(out.path().join("one-level/tables/convergence.csv")).unwrap();
    assert!(table.lines().count() >= 2);
}

#[test]
fn echo_round_trip_reproduces_results() {
    let config: RunConfig = serde_json::from_str(&small_converge_json("echo-src", 2)).unwrap();
    let out = tempfile::tempdir().unwrap();
    let first = workflows::run_converge(&config, out.path()).unwrap();

    let echo_path = out.path().join("echo-src/config.echo");
    let mut echoed = RunConfig::from_file(&echo_path).unwrap();
    echoed.name = "echo-rerun".into();
    let second = workflows::run_converge(&echoed, out.path()).unwrap();

    for (a, b) in first.levels.iter().zip(&second.levels) {
        assert_eq!(a.weighted_l2, b.weighted_l2);
        assert_eq!(a.weighted_h1, b.weighted_h1);
    }
}

#[test]
fn zero_incident_profile_gives_zero_field() {
    let json = r#"{
        "workflow": "simulate",
        "name": "silent",
        "geometry": {
            "z_len": 4.0,
            "r_inner": 0.0,
            "pml_start": 1.5,
            "r_outer": 2.0,
            "axon_radius": 0.5
        },
        "materials": {
            "omega": 5.0,
            "mu": 1.0,
            "axon": { "epsilon": 2.0, "sigma": 0.2 },
            "exterior": { "epsilon": 1.2 }
        },
        "mode": "te",
        "chi0": 10.0,
        "mesh": { "nr": 16, "nz": 24 },
        "incident": { "profile": "zero" }
    }"#;
    let config: RunConfig = serde_json::from_str(json).unwrap();
    let out = tempfile::tempdir().unwrap();
    let outcome = workflows::run_simulate(&config, out.path()).unwrap();
    // Zero data propagates to an identically zero field, so every energy
    // fraction is undefined (reported as absent) rather than spurious.
    assert!(outcome.fraction_axon.is_none());
    assert_eq!(outcome.fraction_exterior, 0.0);
    let csv = fs::read_to_string(out.path().join("silent/fields/field.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn binary_rejects_invalid_config_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "workflow": "converge", "bogus": true }"#).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_axonwave"))
        .args(["converge", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_runs_advise_preset() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/advise.json");
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_axonwave"))
        .args(["advise", "--config"])
        .arg(&preset)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("suggested chi0"));
    assert!(dir.path().join("layer-advice/tables/advise.csv").exists());
    assert!(dir.path().join("layer-advice/config.echo").exists());
}

#[test]
fn binary_subcommand_must_match_workflow() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/advise.json");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_axonwave"))
        .args(["simulate", "--config"])
        .arg(&preset)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
