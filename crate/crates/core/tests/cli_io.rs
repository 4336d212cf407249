//! End-to-end checks of the `tfac` binary: artifact layout, format headers,
//! run-to-run determinism (including across config formats and thread
//! counts), and failure modes.

use std::path::Path;
use std::process::{Command, Output};

fn tfac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const COARSEN_TOML: &str = r#"
seed = 5

[model]
eps2 = 1e-3
alpha = 0.5
kappa = 2.0

[grid]
dim = 2
m = 16
length = 1.0

[time]
horizon = 0.5

[time.mesh]
type = "uniform"
n = 10

[scheme]
kind = "pc"
mode = "fast"
soe_tol = 1e-6

[initial]
type = "random"
amplitude = 0.8

[output]
energy_log_every = 1
snapshot_times = [0.25, 0.5]
snapshot_format = "vtk"
"#;

const COARSEN_JSON: &str = r#"{
  "seed": 5,
  "model": { "eps2": 1e-3, "alpha": 0.5, "kappa": 2.0 },
  "grid": { "dim": 2, "m": 16, "length": 1.0 },
  "time": { "horizon": 0.5, "mesh": { "type": "uniform", "n": 10 } },
  "scheme": { "kind": "pc", "mode": "fast", "soe_tol": 1e-6 },
  "initial": { "type": "random", "amplitude": 0.8 },
  "output": {
    "energy_log_every": 1,
    "snapshot_times": [0.25, 0.5],
    "snapshot_format": "vtk"
  }
}
"#;

#[test]
fn coarsen_artifacts_are_wellformed_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, COARSEN_TOML).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for out in [&out_a, &out_b] {
        let run = tfac(&[
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "coarsen",
        ]);
        assert!(
            run.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&run.stderr)
        );
    }

    let energy = String::from_utf8(read(&out_a.join("energy.csv"))).unwrap();
    let mut lines = energy.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,tau,sup_norm,E_h,E_alpha,dE_alpha"
    );
    // initial record plus one per step, logged every step
    assert_eq!(energy.lines().count(), 1 + 11);
    for line in energy.lines().skip(1) {
        assert_eq!(line.split(',').count(), 7);
    }

    let summary: serde_json::Value =
        serde_json::from_slice(&read(&out_a.join("summary.json"))).unwrap();
    assert!(summary["config_hash"].is_string());
    assert_eq!(summary["mbp_violations"], 0);
    assert_eq!(summary["energy_violations"], 0);
    assert!(summary["wall_time"].as_f64().unwrap() >= 0.0);

    let snap = String::from_utf8(read(&out_a.join("snapshot_000_t0.25.vtk"))).unwrap();
    let head: Vec<&str> = snap.lines().take(10).collect();
    assert_eq!(head[0], "# vtk DataFile Version 3.0");
    assert_eq!(head[3], "DATASET STRUCTURED_POINTS");
    assert_eq!(head[4], "DIMENSIONS 16 16 1");
    assert_eq!(head[7], "POINT_DATA 256");
    assert_eq!(snap.lines().count(), 10 + 256);
    assert!(out_a.join("snapshot_001_t0.5.vtk").exists());

    // identical seeds give identical artifacts, byte for byte
    for name in ["energy.csv", "snapshot_000_t0.25.vtk", "snapshot_001_t0.5.vtk"] {
        assert_eq!(
            read(&out_a.join(name)),
            read(&out_b.join(name)),
            "{name} differs between identical runs"
        );
    }

    // a JSON config describing the same run reproduces the same bytes
    let config_json = dir.path().join("run.json");
    std::fs::write(&config_json, COARSEN_JSON).unwrap();
    let out_c = dir.path().join("c");
    let run = tfac(&[
        "--config",
        config_json.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
        "coarsen",
    ]);
    assert!(run.status.success());
    assert_eq!(read(&out_a.join("energy.csv")), read(&out_c.join("energy.csv")));

    // thread count must not change results
    let out_d = dir.path().join("d");
    let run = tfac(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_d.to_str().unwrap(),
        "--threads",
        "3",
        "coarsen",
    ]);
    assert!(run.status.success());
    assert_eq!(read(&out_a.join("energy.csv")), read(&out_d.join("energy.csv")));

    // the --seed override changes the trajectory
    let out_e = dir.path().join("e");
    let run = tfac(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_e.to_str().unwrap(),
        "--seed",
        "6",
        "coarsen",
    ]);
    assert!(run.status.success());
    assert_ne!(read(&out_a.join("energy.csv")), read(&out_e.join("energy.csv")));
}

#[test]
fn convergence_artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = tfac(&[
            "--out",
            out.to_str().unwrap(),
            "convergence",
            "--alpha",
            "0.3",
            "--ladder",
            "4,8,16,32",
            "--grid-m",
            "8",
            "--soe-tol",
            "1e-5",
        ]);
        assert!(
            run.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    let csv = String::from_utf8(read(&out_a.join("convergence.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,tau_max,error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "4");
    assert_eq!(rows[3][0], "32");
    for row in &rows {
        assert!(row[2].parse::<f64>().unwrap() > 0.0);
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&out_a.join("summary.json"))).unwrap();
    assert!(summary["slopes"][0].is_number());
    assert_eq!(read(&out_a.join("convergence.csv")), read(&out_b.join("convergence.csv")));
}

#[test]
fn soe_and_kernel_audit_tables_are_wellformed() {
    let dir = tempfile::tempdir().unwrap();
    let run = tfac(&[
        "--out",
        dir.path().to_str().unwrap(),
        "soe-check",
        "--alpha",
        "0.5",
        "--tol",
        "1e-6",
        "--delta",
        "1e-4",
        "--points",
        "200",
    ]);
    assert!(
        run.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = String::from_utf8(read(&dir.path().join("soe_check.csv"))).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,exact_kernel,soe_value,abs_error");
    assert_eq!(csv.lines().count(), 1 + 200);
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("soe_summary.json"))).unwrap();
    assert!(summary["max_error"].as_f64().unwrap() <= 1e-6);
    assert!(summary["n_nodes"].as_u64().unwrap() > 0);

    let run = tfac(&[
        "--out",
        dir.path().to_str().unwrap(),
        "kernel-check",
        "--alpha",
        "0.4",
        "--n",
        "16",
        "--gamma",
        "2.0",
    ]);
    assert!(run.status.success());
    let csv = String::from_utf8(read(&dir.path().join("kernel_check.csv"))).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,k,a,theta,p,delta_residual,partition_residual"
    );
    // one row per triangle entry: 1 + 2 + ... + 16
    assert_eq!(csv.lines().count(), 1 + 136);
    for line in csv.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(fields[5] < 1e-12 && fields[6] < 1e-12, "{line}");
    }
}

#[test]
fn perf_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let run = tfac(&[
        "--out",
        dir.path().to_str().unwrap(),
        "perf",
        "--m",
        "32",
        "--n-steps",
        "150",
        "--soe-tol",
        "1e-6",
    ]);
    assert!(
        run.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = String::from_utf8(read(&dir.path().join("perf.csv"))).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,t,direct_seconds,fast_seconds,divergence"
    );
    assert_eq!(csv.lines().count(), 1 + 150);
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("perf_summary.json"))).unwrap();
    assert!(summary["max_divergence"].as_f64().unwrap() <= 1e-6);
    assert!(summary["soe_nodes"].as_u64().unwrap() > 0);
    assert!(summary["config_hash"].is_string());
}

#[test]
fn bad_invocations_fail_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let run = tfac(&["--out", dir.path().to_str().unwrap(), "coarsen"]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("--config"));

    let config = dir.path().join("bad.toml");
    std::fs::write(&config, COARSEN_TOML.replace("alpha = 0.5", "alpha = 1.5")).unwrap();
    let run = tfac(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "coarsen",
    ]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("fractional order"));
}
