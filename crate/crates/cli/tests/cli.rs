use std::f64::consts::LN_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gelfand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn h_b(p: f64) -> f64 {
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

#[test]
fn capacity_of_a_binary_symmetric_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["capacity", "--spec", spec("bsc.json").to_str().unwrap(), "--out", out]);
    let v = json(&dir.path().join("capacity.json"));
    let c = v["capacity_nats"].as_f64().unwrap();
    assert!((c - (LN_2 - h_b(0.1))).abs() < 1e-4);
    assert_eq!(v["header"]["seed"], 0);
    assert_eq!(v["header"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn capacity_of_the_odd_even_sequence_matches_its_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["capacity", "--spec", spec("odd_even.json").to_str().unwrap(), "--out", out]);
    let v = json(&dir.path().join("capacity.json"));
    let closed = v["closed_form_nats"].as_f64().unwrap();
    assert!((v["analytic_nats"].as_f64().unwrap() - closed).abs() < 1e-9);
    assert!((v["liminf_estimate_nats"].as_f64().unwrap() - closed).abs() < 0.01);
    let csv = fs::read_to_string(dir.path().join("capacity_averages.csv")).unwrap();
    assert!(csv.starts_with("# gelfand "));
    assert_eq!(csv.lines().nth(1), Some("n,average_nats"));
    assert_eq!(csv.lines().count(), 2 + (1 << 16));
}

#[test]
fn malformed_rows_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"state_pmf": [0.5, 0.5], "channel": [[[0.9, 0.1], [0.1, 0.9]], [[0.2, 0.7], [0.8, 0.2]]]}"#,
    )
    .unwrap();
    let out = run(&["capacity", "--spec", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel[1][0]"));
    fs::write(&bad, "{\"state_pmf\": [1,\n]}").unwrap();
    let out = run(&["capacity", "--spec", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn spectrum_of_a_single_system_peaks_at_its_mutual_information() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["spectrum", "--spec", spec("bsc.json").to_str().unwrap(), "--out", out, "--n", "2000"]);
    let v = json(&dir.path().join("spectrum_summary.json"));
    let modes = v["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 1);
    let mi = LN_2 - h_b(0.1);
    assert!((modes[0]["location"].as_f64().unwrap() - mi).abs() < 0.01);
    let csv = fs::read_to_string(dir.path().join("spectrum_histogram.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("bin_lo_nats,bin_hi_nats,count"));
    let total: u64 = csv.lines().skip(2).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 10_000);
}

#[test]
fn spectrum_of_a_two_component_mixture_is_bimodal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["spectrum", "--spec", spec("bec_mixture.json").to_str().unwrap(), "--out", out]);
    let v = json(&dir.path().join("spectrum_summary.json"));
    let modes = v["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 2);
    assert!((modes[0]["location"].as_f64().unwrap() - 0.15).abs() < 0.02);
    assert!((modes[1]["location"].as_f64().unwrap() - 0.55).abs() < 0.02);
    assert!(v["mass_near_modes"].as_f64().unwrap() >= 0.95);
    assert!((v["summary"]["inf_rate"].as_f64().unwrap() - 0.15).abs() < 0.02);
}

#[test]
fn spectrum_budget_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = spec("bsc.json");
    let zero = run(&["spectrum", "--spec", s.to_str().unwrap(), "--out", out, "--draws", "0"]);
    assert_eq!(zero.status.code(), Some(2));
    let few = run(&["spectrum", "--spec", s.to_str().unwrap(), "--out", out, "--draws", "50"]);
    assert_eq!(few.status.code(), Some(3));
    let bad_delta = run(&["spectrum", "--spec", s.to_str().unwrap(), "--out", out, "--delta", "0.9"]);
    assert_eq!(bad_delta.status.code(), Some(2));
}

#[test]
fn simulate_below_capacity_respects_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = spec("bsc_achievable.json");
    run_ok(&["simulate", "--spec", s.to_str().unwrap(), "--out", out, "--n", "400", "--trials", "500"]);
    let v = json(&dir.path().join("simulate_summary.json"));
    assert_eq!(v["error_within_rho"], true);
    assert!(v["converse_trend"].is_null());
    let rho = &v["report"]["rho"];
    let sum = ["eta_term", "pi2", "covering_term", "packing_term"]
        .iter()
        .map(|k| rho[k].as_f64().unwrap())
        .sum::<f64>();
    assert!((sum - rho["total"].as_f64().unwrap()).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("simulate_trials.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("trial,message,L,e1,e2,e3,decoded,ok"));
    assert_eq!(csv.lines().count(), 2 + 500);
}

#[test]
fn simulate_above_capacity_trends_to_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = spec("bsc_converse.json");
    run_ok(&["simulate", "--spec", s.to_str().unwrap(), "--out", out, "--n", "800", "--trials", "200"]);
    let v = json(&dir.path().join("simulate_summary.json"));
    assert_eq!(v["converse_trend"]["error_to_one_trend"], true);
    assert!(v["report"]["error"]["value"].as_f64().unwrap() >= 0.9);
}

#[test]
fn oversized_simulation_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--spec",
        spec("bsc.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--n",
        "100000000",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2^30"));
}

#[test]
fn region_frontier_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["region", "--spec", spec("flip_state.json").to_str().unwrap(), "--out", out]);
    let csv = fs::read_to_string(dir.path().join("region_frontier.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("r_d_nats,r_nats"));
    let rates: Vec<f64> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 8);
    assert!(rates.windows(2).all(|w| w[1] >= w[0]));
    let cap = tempfile::tempdir().unwrap();
    run_ok(&["capacity", "--spec", spec("flip_state.json").to_str().unwrap(), "--out", cap.path().to_str().unwrap()]);
    let c = json(&cap.path().join("capacity.json"));
    assert!((rates[0] - c["capacity_nats"].as_f64().unwrap()).abs() < 2e-3);
    assert!((rates[7] - c["state_at_both_nats"].as_f64().unwrap()).abs() < 2e-3);
    let p = json(&dir.path().join("region_policies.json"));
    assert_eq!(p["v_bound"], 5);
    assert_eq!(p["points"].as_array().unwrap().len(), 8);
}

#[test]
fn outputs_are_byte_reproducible_across_worker_counts() {
    let s = spec("bec_mixture.json");
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        run_ok(&["spectrum", "--spec", s.to_str().unwrap(), "--out", out, "--workers", workers, "--seed", "5"]);
        files.push((
            fs::read(dir.path().join("spectrum_summary.json")).unwrap(),
            fs::read(dir.path().join("spectrum_histogram.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}
