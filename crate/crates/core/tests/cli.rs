use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qudit_rabi::cli::{channel_rows, verify_checks, RunConfig};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qudit-rabi")).args(args).output().expect("binary runs")
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = bin(&args);
    o.status.code().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const SU2: &str = r#"{"n": 3, "algebra": {"kind": "su2", "twoJ": 4}, "omega": 1.0, "g": 0.2,
    "delta": {"abs": 0.01, "phase": 0.3}, "trunc_dim": 5, "command": {"m": 0, "r": 2}}"#;

#[test]
fn matelem_passes_and_fails_on_zero_tolerance() {
    let (_d, cfg, out) = setup(
        r#"{"n": 2, "algebra": {"kind": "su11", "K": 0.75}, "omega": 1.0, "g": 0.1,
        "delta": {"abs": 0.0, "phase": 0.0}, "trunc_dim": 128, "command": {"max_index": 3}}"#,
    );
    assert_eq!(run("matelem", &cfg, &out, &[]), 0);
    let rep = report(&out);
    let rows = rep["points"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4 * 16);
    // z = 0.3 row for <1|V|0>
    let row = rows.iter().find(|r| r["n"] == 1 && r["m"] == 0 && r["z_re"] == 0.3).unwrap();
    let lib = qudit_rabi::coherent::matelem(
        qudit_rabi::AlgebraSpec::Su11 { k: 0.75 },
        1,
        0,
        num_complex::Complex64::new(0.3, 0.0),
    )
    .unwrap();
    assert_eq!(row["re"].as_f64().unwrap(), lib.re);
    assert_eq!(run("matelem", &cfg, &out, &["--tol", "0"]), 1);
}

#[test]
fn verify_matches_library_bit_exactly() {
    let (_d, cfg, out) = setup(SU2);
    assert_eq!(run("verify", &cfg, &out, &[]), 0);
    let rep = report(&out);
    assert_eq!(rep["pass"], true);
    let model = RunConfig::parse(SU2).unwrap().models().unwrap()[0];
    let lib = verify_checks(&model, None).unwrap();
    let checks = rep["points"][0]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), lib.len());
    for (c, l) in checks.iter().zip(&lib) {
        assert_eq!(c["name"], l.name.as_str());
        assert_eq!(c["deviation"].as_f64().unwrap(), l.deviation);
    }
}

#[test]
fn rabi_table() {
    let (_d, cfg, out) = setup(SU2);
    assert_eq!(run("rabi", &cfg, &out, &[]), 0);
    let csv = std::fs::read_to_string(out.join("channels.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "g,m,r,j,j_prime,delta_abs,rabi_re,rabi_im,rabi_abs,delta_over_g,residual");
    assert_eq!(lines.len(), 1 + 3);
    let model = RunConfig::parse(SU2).unwrap().models().unwrap()[0];
    let rows = channel_rows(&model, 0, 2).unwrap();
    let rep = report(&out);
    let json_rows = rep["points"][0]["channels"].as_array().unwrap();
    let mut nulls = 0;
    for (row, lib) in json_rows.iter().zip(&rows) {
        assert_eq!(row["rabi_re"].as_f64().unwrap(), lib.rabi_re);
        assert_eq!(row["rabi_im"].as_f64().unwrap(), lib.rabi_im);
        if lib.delta_abs.is_none() {
            assert!(row["delta_abs"].is_null());
            nulls += 1;
        }
    }
    // phase 0.3, n = 3: cos(0.3), cos(0.3 + 2pi/3), cos(0.3 + 4pi/3) differ in sign
    assert!((1..3).contains(&nulls), "{nulls}");
}

#[test]
fn rabi_sweep_keeps_config_order() {
    let (_d, cfg, out) = setup(
        r#"{"n": 2, "algebra": {"kind": "oscillator"}, "omega": 1.0, "g": [0.3, 0.1, 0.2],
        "delta": {"abs": 0.01, "phase": 0.0}}"#,
    );
    assert_eq!(run("rabi", &cfg, &out, &[]), 0);
    let rep = report(&out);
    let gs: Vec<f64> = rep["points"].as_array().unwrap().iter().map(|p| p["g"].as_f64().unwrap()).collect();
    assert_eq!(gs, vec![0.3, 0.1, 0.2]);
}

#[test]
fn simulate_outputs() {
    let (_d, cfg, out) = setup(
        r#"{"n": 2, "algebra": {"kind": "su2", "twoJ": 1}, "omega": 1.0, "g": 0.5,
        "delta": {"abs": 0.0, "phase": 0.0}, "command": {"solve_resonance": true, "dynamics": ["rwa", "reduced", "full"], "t_steps": 300}}"#,
    );
    assert_eq!(run("simulate", &cfg, &out, &["--svg"]), 0);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["time", "rwa_re_a0_0", "rwa_im_a0_0", "rwa_re_a0_1"]);
    assert_eq!(header.len(), 1 + 3 * (8 + 4 + 1));
    let norm_cols: Vec<usize> =
        header.iter().enumerate().filter(|(_, h)| h.ends_with("_norm")).map(|(i, _)| i).collect();
    assert_eq!(norm_cols.len(), 3);
    let mut rows = 0;
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        for &i in &norm_cols[..2] {
            assert!((cells[i] - 1.0).abs() < 1e-8);
        }
        rows += 1;
    }
    assert_eq!(rows, 301);
    let rep = report(&out);
    let rabi = rep["points"][0]["channel"]["rabi_abs"].as_f64().unwrap();
    for run in rep["points"][0]["runs"].as_array().unwrap() {
        let f = run["extracted_frequency"].as_f64().unwrap();
        assert!((f - rabi).abs() <= 0.1 * rabi);
        assert!(run["delta_over_g"].as_f64().unwrap() > 1.0);
    }
    let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);
}

#[test]
fn simulate_rejects_sweeps_and_bad_channels() {
    let (_d, cfg, out) = setup(
        r#"{"n": 2, "algebra": {"kind": "oscillator"}, "omega": 1.0, "g": [0.1, 0.2],
        "delta": {"abs": 0.01, "phase": 0.0}}"#,
    );
    assert_eq!(run("simulate", &cfg, &out, &[]), 2);
    let (_d2, cfg2, out2) = setup(
        r#"{"n": 2, "algebra": {"kind": "oscillator"}, "omega": 1.0, "g": 0.1,
        "delta": {"abs": 0.01, "phase": 0.0}, "command": {"m": 2, "r": 1}}"#,
    );
    assert_eq!(run("simulate", &cfg2, &out2, &[]), 2);
}

#[test]
fn gates_report() {
    let text = r#"{"n": 3, "algebra": {"kind": "oscillator"}, "omega": 1.0, "g": 0.2,
        "delta": {"abs": 0.01, "phase": 0.4}, "trunc_dim": 16, "command": {"target": "planted", "max_depth": 2, "beam_width": 8}}"#;
    let (_d, cfg, out) = setup(text);
    assert_eq!(run("gates", &cfg, &out, &["--seed", "5"]), 0);
    let first = std::fs::read(out.join("report.json")).unwrap();
    let rep = report(&out);
    let p = &rep["points"][0];
    assert_eq!(p["elementary_count"], 9);
    assert_eq!(p["enumerated"], 9);
    assert_eq!(p["elementary"].as_array().unwrap().len(), 9);
    assert!(p["max_unitarity_defect"].as_f64().unwrap() <= 1e-10);
    assert_eq!(p["synthesis"]["seed"], 5);
    assert_eq!(run("gates", &cfg, &out, &["--seed", "5"]), 0);
    assert_eq!(std::fs::read(out.join("report.json")).unwrap(), first);
}

#[test]
fn usage_and_config_errors() {
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["nonsense"]).status.code(), Some(2));
    let (_d, cfg, out) = setup("{not json");
    assert_eq!(run("verify", &cfg, &out, &[]), 2);
    let (_d2, cfg2, out2) = setup(SU2);
    assert_eq!(run("verify", &cfg2, &out2, &["--tol", "-1"]), 2);
}
