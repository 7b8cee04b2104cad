//! End-to-end tests of the `emsim` binary: exit codes, CSV schemas and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emsim")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("emsim_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn emsim")
}

/// CSV body = everything except `#` comment lines.
fn csv_body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

const ZERO_VARIANCE_CONFIG: &str = r#"{
  "mode": "battery-only",
  "battery_capacity": 40.0,
  "horizon": 50000,
  "seed": 1,
  "n_replications": 2,
  "replenishment": { "kind": "gaussian", "mean": 10.0, "var": 0.0 },
  "rate_fn": { "kind": "awgn", "gamma": 1.0 },
  "utility": { "kind": "log-capacity", "gamma": 1.0 },
  "policy": { "kind": "constant", "e": 10.0 }
}"#;

#[test]
fn simulate_zero_variance_sanity() {
    let dir = temp_dir("sanity");
    let cfg = dir.join("config.json");
    write(&cfg, ZERO_VARIANCE_CONFIG);
    let out = run(&["--out-dir", dir.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let body = csv_body(&dir.join("metrics.csv"));
    let mut lines = body.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("config_hash,seed,policy,p_discharge"));
    let row = lines.next().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[2], "constant");
    assert_eq!(fields[3], "0.00000e0", "p_discharge should be zero: {row}");
}

#[test]
fn negative_battery_capacity_exits_2_naming_field() {
    let dir = temp_dir("negm");
    let cfg = dir.join("config.json");
    write(&cfg, &ZERO_VARIANCE_CONFIG.replace("\"battery_capacity\": 40.0", "\"battery_capacity\": -5.0"));
    let out = run(&["--out-dir", dir.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("battery_capacity"), "stderr: {err}");
}

#[test]
fn malformed_json_exits_2_with_line_info() {
    let dir = temp_dir("badjson");
    let cfg = dir.join("config.json");
    write(&cfg, "{ \"mode\": \"battery-only\",\n  oops\n}");
    let out = run(&["--out-dir", dir.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "stderr should carry a line number: {err}");
}

#[test]
fn unstable_load_exits_2_naming_condition() {
    let dir = temp_dir("unstable");
    let cfg = dir.join("config.json");
    write(
        &cfg,
        r#"{
  "mode": "joint",
  "battery_capacity": 40.0,
  "buffer_capacity": 20.0,
  "horizon": 50000,
  "seed": 1,
  "replenishment": { "kind": "gaussian", "mean": 10.0, "var": 1.0 },
  "arrivals": { "kind": "gaussian", "mean": 5.0, "var": 1.0 },
  "rate_fn": { "kind": "awgn", "gamma": 1.0 },
  "utility": { "kind": "rate-log" },
  "policy": { "kind": "constant", "e": 5.0 }
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("λ < C(µ)"), "stderr: {err}");
}

const SMALL_SWEEP: &str = r#"{
  "base": {
    "mode": "battery-only",
    "battery_capacity": 30.0,
    "horizon": 200000,
    "seed": 11,
    "n_replications": 4,
    "replenishment": { "kind": "gaussian", "mean": 10.0, "var": 4.0 },
    "rate_fn": { "kind": "awgn", "gamma": 1.0 },
    "utility": { "kind": "log-capacity", "gamma": 1.0 },
    "policy": { "kind": "scheme-e", "delta_r": 0.5 }
  },
  "axis": "battery",
  "values": [20.0, 30.0, 40.0],
  "policies": [
    { "kind": "scheme-e", "delta_r": 0.5 },
    { "kind": "scheme-b", "beta": 2.0 },
    { "kind": "scheme-to", "epsilon": 0.5 }
  ]
}"#;

#[test]
fn sweep_emits_full_grid_and_plot_script() {
    let dir = temp_dir("sweep");
    let spec = dir.join("sweep.json");
    write(&spec, SMALL_SWEEP);
    let out = run(&["--out-dir", dir.to_str().unwrap(), "sweep", spec.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let body = csv_body(&dir.join("sweep.csv"));
    let rows: Vec<&str> = body.lines().skip(1).collect();
    assert_eq!(rows.len(), 9, "3 policies x 3 values");
    for row in &rows {
        assert!(row.ends_with(",ok"), "row failed: {row}");
    }
    // Theory columns are policy-appropriate: scheme-e rows carry a
    // diffusion prediction, scheme-to rows have no closed form.
    let fields = |row: &str| row.split(',').map(str::to_string).collect::<Vec<_>>();
    for row in &rows {
        let f = fields(row);
        match f[0].as_str() {
            "scheme-e" | "scheme-b" => assert!(!f[11].is_empty(), "expected discharge theory: {row}"),
            "scheme-to" => assert!(f[11].is_empty(), "no theory for scheme-to: {row}"),
            other => panic!("unexpected policy {other}"),
        }
        // Battery-only sweep never carries a loss-side theory.
        assert!(f[12].is_empty());
    }
    let script = std::fs::read_to_string(dir.join("sweep_plot.gp")).unwrap();
    assert!(script.contains("set logscale xy"));
    assert!(script.contains("yerrorbars"));
}

#[test]
fn sweep_rejects_empty_policy_list() {
    let dir = temp_dir("sweep_empty");
    let spec = dir.join("sweep.json");
    write(&spec, &SMALL_SWEEP.replace(
        r#""policies": [
    { "kind": "scheme-e", "delta_r": 0.5 },
    { "kind": "scheme-b", "beta": 2.0 },
    { "kind": "scheme-to", "epsilon": 0.5 }
  ]"#,
        r#""policies": []"#,
    ));
    let out = run(&["--out-dir", dir.to_str().unwrap(), "sweep", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("policies"));
}

#[test]
fn sweep_records_per_cell_failures_and_continues() {
    // A battery capacity of 0.8 violates the scheme-b precondition
    // (capacity must exceed 1), failing that cell only.
    let dir = temp_dir("sweep_fail");
    let spec = dir.join("sweep.json");
    write(&spec, &SMALL_SWEEP.replace("[20.0, 30.0, 40.0]", "[0.8, 30.0, 40.0]"));
    let out = run(&["--out-dir", dir.to_str().unwrap(), "sweep", spec.to_str().unwrap()]);
    assert!(out.status.success());
    let body = csv_body(&dir.join("sweep.csv"));
    let rows: Vec<&str> = body.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    let failed: Vec<&&str> = rows.iter().filter(|r| !r.ends_with(",ok")).collect();
    assert!(!failed.is_empty(), "expected at least one failed cell");
    for row in failed {
        assert!(row.starts_with("scheme-b,battery,8"), "unexpected failure: {row}");
    }
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let dir = temp_dir("deterministic");
    let spec = dir.join("sweep.json");
    write(&spec, SMALL_SWEEP);
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    let out3 = dir.join("c");
    for (out, threads) in [(&out1, "2"), (&out2, "2"), (&out3, "1")] {
        let r = run(&[
            "--out-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "sweep",
            spec.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    let a = csv_body(&out1.join("sweep.csv"));
    let b = csv_body(&out2.join("sweep.csv"));
    let c = csv_body(&out3.join("sweep.csv"));
    assert_eq!(a, b, "identical rerun must produce identical CSV body");
    assert_eq!(a, c, "thread count must not affect the CSV body");
}

#[test]
fn seed_override_changes_results() {
    let dir = temp_dir("seed");
    let cfg = dir.join("config.json");
    write(
        &cfg,
        &ZERO_VARIANCE_CONFIG.replace("\"var\": 0.0", "\"var\": 4.0").replace("\"e\": 10.0", "\"e\": 10.5"),
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let ra = run(&["--out-dir", out_a.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    let rb = run(&["--out-dir", out_b.to_str().unwrap(), "--seed", "999", "simulate", cfg.to_str().unwrap()]);
    assert!(ra.status.success() && rb.status.success());
    let a = csv_body(&out_a.join("metrics.csv"));
    let b = csv_body(&out_b.join("metrics.csv"));
    assert_ne!(a, b);
    assert!(b.contains(",999,"));
}

#[test]
fn oracle_small_chain_passes() {
    let dir = temp_dir("oracle");
    let cfg = dir.join("config.json");
    write(
        &cfg,
        r#"{
  "mode": "battery-only",
  "battery_capacity": 6.0,
  "horizon": 1000000,
  "seed": 17,
  "n_replications": 10,
  "initial_battery": 3.0,
  "replenishment": { "kind": "discrete", "support": [[0.0, 0.3], [2.0, 0.4], [4.0, 0.3]] },
  "rate_fn": { "kind": "linear", "slope": 1.0 },
  "utility": { "kind": "log-capacity", "gamma": 1.0 },
  "policy": { "kind": "constant", "e": 2.0 }
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "oracle", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
    let body = csv_body(&dir.join("oracle.csv"));
    assert!(body.lines().count() >= 4, "metric rows expected: {body}");
}

#[test]
fn oracle_rejects_oversized_state_space() {
    let dir = temp_dir("oracle_big");
    let cfg = dir.join("config.json");
    write(
        &cfg,
        r#"{
  "mode": "battery-only",
  "battery_capacity": 500.0,
  "horizon": 100000,
  "seed": 17,
  "initial_battery": 250.0,
  "replenishment": { "kind": "discrete", "support": [[0.0, 0.5], [2.0, 0.5]] },
  "rate_fn": { "kind": "linear", "slope": 1.0 },
  "utility": { "kind": "log-capacity", "gamma": 1.0 },
  "policy": { "kind": "constant", "e": 1.0 }
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "oracle", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("200"), "stderr should mention the state cap: {err}");
}

#[test]
fn stats_estimates_match_declared_values() {
    let dir = temp_dir("stats");
    let spec = dir.join("stats.json");
    write(
        &spec,
        r#"{
  "source": { "kind": "gaussian", "mean": 10.0, "var": 4.0 },
  "horizon": 400000,
  "batch_len": 400,
  "seed": 9
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "stats", spec.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let body = csv_body(&dir.join("stats.csv"));
    let row = body.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let mean: f64 = fields[0].parse().unwrap();
    let asym: f64 = fields[2].parse().unwrap();
    assert!((mean - 10.0).abs() < 0.05, "mean {mean}");
    assert!((asym - 4.0).abs() < 0.5, "asym {asym}");
}

#[test]
fn rho_sweep_runs_each_intensity() {
    let dir = temp_dir("rho");
    let spec = dir.join("sweep.json");
    write(
        &spec,
        r#"{
  "base": {
    "mode": "joint",
    "battery_capacity": 80.0,
    "buffer_capacity": 60.0,
    "horizon": 300000,
    "seed": 5,
    "n_replications": 4,
    "replenishment": { "kind": "gaussian", "mean": 10.0, "var": 4.0 },
    "arrivals": { "kind": "gaussian", "mean": 2.0, "var": 1.0 },
    "rate_fn": { "kind": "awgn", "gamma": 1.0 },
    "utility": { "kind": "rate-log" },
    "policy": { "kind": "scheme-e", "delta_r": 0.5 }
  },
  "axis": "rho",
  "values": [0.4, 0.6, 0.8],
  "policies": [{ "kind": "scheme-to", "epsilon": 0.5 }]
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "sweep", spec.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let body = csv_body(&dir.join("sweep.csv"));
    let rows: Vec<&str> = body.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.ends_with(",ok"), "{row}");
        assert!(row.starts_with("scheme-to,rho,"));
    }
    // Intensities at or above 1 are rejected up front.
    write(&spec, &std::fs::read_to_string(&spec).unwrap().replace("[0.4, 0.6, 0.8]", "[0.4, 1.0]"));
    let out = run(&["--out-dir", dir.to_str().unwrap(), "sweep", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tradeoff_emits_curve_and_points() {
    let dir = temp_dir("tradeoff");
    let spec = dir.join("tradeoff.json");
    write(
        &spec,
        r#"{
  "base": {
    "mode": "joint",
    "battery_capacity": 40.0,
    "buffer_capacity": 30.0,
    "horizon": 400000,
    "seed": 99,
    "n_replications": 4,
    "replenishment": { "kind": "gaussian", "mean": 10.0, "var": 4.0 },
    "arrivals": { "kind": "gaussian", "mean": 2.0, "var": 1.0 },
    "rate_fn": { "kind": "awgn", "gamma": 1.0 },
    "utility": { "kind": "rate-log" },
    "policy": { "kind": "scheme-e", "delta_r": 1.0 }
  },
  "n_grid": 50,
  "operating_points": [1.0],
  "m_grid": [15.0, 20.0, 25.0, 30.0],
  "k_grid": [8.0, 12.0, 16.0, 20.0]
}"#,
    );
    let out = run(&["--out-dir", dir.to_str().unwrap(), "tradeoff", spec.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let curve = csv_body(&dir.join("tradeoff_curve.csv"));
    assert_eq!(curve.lines().count(), 51, "header + 50 grid rows");
    // Monotone exponent columns along the drift grid.
    let mut last_d = 0.0f64;
    let mut last_l = f64::INFINITY;
    for row in curve.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[1] > last_d);
        assert!(f[2] < last_l);
        last_d = f[1];
        last_l = f[2];
    }
    let points = csv_body(&dir.join("tradeoff_points.csv"));
    assert_eq!(points.lines().count(), 2, "header + one operating point");
    assert!(dir.join("tradeoff_plot.gp").exists());
}
