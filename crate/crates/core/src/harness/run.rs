//! Configured simulation driver: builds the stepper from a RunConfig, walks
//! the mesh (fixed or adaptive), feeds the structure monitors, and emits the
//! energy log, snapshots and a JSON summary.

use super::config::{
    random_initial_field, HistoryModeConfig, InitialConfig, RunConfig, SnapshotFormat,
};
use super::manufactured::ManufacturedCase;
use super::output::{write_energy_csv, write_raw, write_summary_json, write_vtk, RunSummary};
use crate::energy::{free_energy, EnergyMonitor, EnergyRecord};
use crate::error::{KitError, Result};
use crate::schemes::{SourceFn, Stepper};
use crate::soe::{build_soe_with, SoeApproximation, SoeOptions};
use crate::space_disc::ScalarField;
use crate::temporal_mesh::AdaptiveController;
use std::path::Path;
use std::time::Instant;

pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<EnergyRecord>,
    pub final_field: ScalarField,
    pub times: Vec<f64>,
    pub solve_count: usize,
    pub predictor_sup_max: f64,
    pub history_memory_bytes: usize,
    pub warnings: Vec<String>,
}

fn build_initial(config: &RunConfig) -> Result<(ScalarField, Option<SourceFn>)> {
    let grid = config.grid_spec()?;
    match config.initial {
        InitialConfig::Random { amplitude } => {
            Ok((random_initial_field(grid, config.seed, amplitude)?, None))
        }
        InitialConfig::Constant { value } => Ok((ScalarField::constant(grid, value), None)),
        InitialConfig::Manufactured { mu } => {
            let case = ManufacturedCase::new(mu)?;
            let params = config.model_params()?;
            Ok((
                case.initial_field(grid),
                Some(case.source(params, grid.dim())),
            ))
        }
    }
}

fn build_surrogate(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Option<SoeApproximation>> {
    if config.scheme.mode != HistoryModeConfig::Fast {
        return Ok(None);
    }
    let delta = match config.scheme.soe_delta {
        Some(d) => d,
        None => config.min_step()?,
    };
    let soe = build_soe_with(
        config.model.alpha,
        config.scheme.soe_tol,
        delta,
        config.time.horizon,
        SoeOptions { enforce_cap: false, scan_points: 10_000 },
    )?;
    if soe.cap_exceeded() {
        warnings.push(format!(
            "surrogate tolerance {:.3e} exceeds the dissipation-law cap; maximum-bound \
             and energy guarantees do not apply to this run",
            config.scheme.soe_tol
        ));
    }
    Ok(Some(soe))
}

pub fn run_simulation(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let params = config.model_params()?;
    let horizon = config.time.horizon;
    let mut warnings = Vec::new();

    let (initial, source) = build_initial(config)?;
    let soe = build_surrogate(config, &mut warnings)?;
    let mut stepper = match &soe {
        Some(soe) => Stepper::with_surrogate(
            params,
            config.scheme_kind(),
            soe,
            initial.clone(),
            horizon,
            source,
        )?,
        None => Stepper::new(
            params,
            config.scheme_kind(),
            crate::schemes::HistoryMode::Direct,
            initial.clone(),
            horizon,
            source,
        )?,
    };
    warnings.extend(stepper.warnings().iter().cloned());

    let monitor_until = config.output.energy_monitor_until.unwrap_or(f64::INFINITY);
    let e0 = free_energy(&params, &initial);
    let mut monitor = if monitor_until > 0.0 {
        Some(match &soe {
            Some(soe) => EnergyMonitor::new_fast(soe, e0, initial.norm_max()),
            None => EnergyMonitor::new_direct(params.alpha, e0, initial.norm_max()),
        })
    } else {
        None
    };

    let mut snapshot_times: Vec<f64> = config.output.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut next_snapshot = 0usize;
    let mut snapshot_index = 0usize;
    let write_snapshot = |field: &ScalarField, t: f64, target: f64, idx: usize| -> Result<()> {
        if let Some(dir) = out_dir {
            // format the extension by hand: with_extension would eat the
            // fractional part of the target time
            let base = dir.join(format!("snapshot_{idx:03}_t{target}"));
            match config.output.snapshot_format {
                SnapshotFormat::Vtk => {
                    let mut path = base.into_os_string();
                    path.push(".vtk");
                    write_vtk(path.as_ref(), field, t)?;
                }
                SnapshotFormat::Raw => write_raw(&base, field, t)?,
            }
        }
        Ok(())
    };
    while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= 0.0 {
        write_snapshot(&initial, 0.0, snapshot_times[next_snapshot], snapshot_index)?;
        next_snapshot += 1;
        snapshot_index += 1;
    }

    // step targets: fixed meshes walk their node list; adaptive runs choose
    // each step from the energy rate, first step at tau_min
    let fixed = config.fixed_mesh()?;
    let controller = config.adaptive_controller()?;
    if let Some(c) = &controller {
        if c.tau_max < 2.0 * c.tau_min {
            return Err(KitError::Config(
                "adaptive runs need tau_max >= 2 tau_min so every step, including \
                 the closing ones, stays within the controller band"
                    .into(),
            ));
        }
    }
    let mut previous_free_energy = e0;
    let mut last_rate: Option<f64> = None;
    let mut step_index = 0usize;
    let max_steps = 20_000_000usize;
    loop {
        let t_now = stepper.time();
        if t_now >= horizon * (1.0 - 1e-14) {
            break;
        }
        let t_next = match (&fixed, &controller) {
            (Some(mesh), _) => {
                if step_index >= mesh.n_steps() {
                    break;
                }
                mesh.node(step_index + 1)
            }
            (None, Some(controller)) => adaptive_target(controller, last_rate, t_now, horizon)?,
            (None, None) => unreachable!("config validation admits fixed or adaptive only"),
        };
        let report = stepper.step(t_next)?;
        step_index += 1;
        if step_index > max_steps {
            return Err(KitError::Solver(format!(
                "run exceeded {max_steps} steps before reaching t = {horizon}"
            )));
        }

        let monitor_active = monitor.is_some() && report.t <= monitor_until * (1.0 + 1e-12);
        let need_energy = monitor_active || controller.is_some();
        if need_energy {
            let e = free_energy(&params, stepper.current());
            if monitor_active {
                monitor.as_mut().unwrap().push_step(&report, e)?;
            }
            if controller.is_some() {
                last_rate = Some((e - previous_free_energy) / report.tau);
            }
            previous_free_energy = e;
        }
        while next_snapshot < snapshot_times.len()
            && report.t >= snapshot_times[next_snapshot] * (1.0 - 1e-12)
        {
            write_snapshot(
                stepper.current(),
                report.t,
                snapshot_times[next_snapshot],
                snapshot_index,
            )?;
            next_snapshot += 1;
            snapshot_index += 1;
        }
    }

    let (records, energy_violations) = match &monitor {
        Some(m) => (m.records().to_vec(), m.violations()),
        None => (Vec::new(), 0),
    };
    let summary = RunSummary {
        config_hash: config.hash(),
        slopes: None,
        mbp_violations: stepper.mbp_violations(),
        energy_violations,
        wall_time: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        if !records.is_empty() {
            write_energy_csv(
                &dir.join("energy.csv"),
                &records,
                config.output.energy_log_every,
            )?;
        }
        write_summary_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunOutcome {
        summary,
        records,
        final_field: stepper.current().clone(),
        times: stepper.times().to_vec(),
        solve_count: stepper.solve_count(),
        predictor_sup_max: stepper.predictor_sup_max(),
        history_memory_bytes: stepper.history_memory_bytes(),
        warnings,
    })
}

/// Next adaptive target time. The controller maps the backward free-energy
/// rate to a step in [tau_min, tau_max] (first step: tau_min); near the
/// horizon the step is shortened so the remainder never drops below tau_min,
/// and the final step lands on the horizon exactly.
fn adaptive_target(
    controller: &AdaptiveController,
    last_rate: Option<f64>,
    t_now: f64,
    horizon: f64,
) -> Result<f64> {
    let remaining = horizon - t_now;
    let mut tau = match last_rate {
        None => controller.tau_min,
        Some(rate) => controller.next_step(rate)?,
    };
    if remaining <= controller.tau_max * (1.0 + 1e-12) {
        return Ok(horizon);
    }
    if remaining - tau < controller.tau_min {
        tau = remaining - controller.tau_min;
    }
    Ok(t_now + tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::RunConfig;

    fn base_config(mesh: &str) -> RunConfig {
        let text = format!(
            r#"{{
                "model": {{"eps2": 1e-3, "alpha": 0.4}},
                "grid": {{"dim": 2, "m": 16, "length": 1.0}},
                "time": {{"horizon": 1.0, "mesh": {mesh}}},
                "scheme": {{"kind": "pc", "mode": "direct"}},
                "initial": {{"type": "random", "amplitude": 0.5}},
                "seed": 3
            }}"#
        );
        RunConfig::from_json_str(&text).unwrap()
    }

    #[test]
    fn fixed_mesh_run_maintains_both_structures() {
        let config = base_config(r#"{"type": "uniform", "n": 25}"#);
        let outcome = run_simulation(&config, None).unwrap();
        assert_eq!(outcome.times.len(), 26);
        assert_eq!(outcome.summary.mbp_violations, 0);
        assert_eq!(outcome.summary.energy_violations, 0);
        assert_eq!(outcome.records.len(), 26);
        assert_eq!(outcome.solve_count, 50, "predictor-corrector: two per step");
        assert!(outcome.summary.wall_time > 0.0);
    }

    #[test]
    fn identical_configs_reproduce_bitwise() {
        let config = base_config(r#"{"type": "graded", "n": 20, "gamma": 2.0}"#);
        let a = run_simulation(&config, None).unwrap();
        let b = run_simulation(&config, None).unwrap();
        assert_eq!(a.final_field.data(), b.final_field.data());
        assert_eq!(a.summary.config_hash, b.summary.config_hash);
        let mut other = config.clone();
        other.seed = 4;
        let c = run_simulation(&other, None).unwrap();
        assert_ne!(a.final_field.data(), c.final_field.data());
    }

    #[test]
    fn adaptive_steps_stay_in_band_and_land_on_the_horizon() {
        let config =
            base_config(r#"{"type": "adaptive", "tau_min": 0.01, "tau_max": 0.1, "gain": 1e4}"#);
        let outcome = run_simulation(&config, None).unwrap();
        let times = &outcome.times;
        assert_eq!(*times.last().unwrap(), 1.0);
        let taus: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!((taus[0] - 0.01).abs() < 1e-12, "first step at tau_min");
        for (i, &tau) in taus.iter().enumerate() {
            assert!(
                tau >= 0.01 - 1e-12 && tau <= 0.1 + 1e-12,
                "step {i}: tau {tau} left [tau_min, tau_max]"
            );
        }
        assert_eq!(outcome.summary.mbp_violations, 0);
        assert_eq!(outcome.summary.energy_violations, 0);
    }

    #[test]
    fn fast_mode_run_writes_consistent_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = base_config(r#"{"type": "uniform", "n": 20}"#);
        config.scheme.mode = HistoryModeConfig::Fast;
        config.scheme.soe_tol = 1e-8;
        config.output.snapshot_times = vec![0.0, 0.5, 1.0];
        run_simulation(&config, Some(dir.path())).unwrap();
        for name in [
            "energy.csv",
            "summary.json",
            "snapshot_000_t0.vtk",
            "snapshot_001_t0.5.vtk",
            "snapshot_002_t1.vtk",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let summary = super::super::output::read_summary_json(&dir.path().join("summary.json")).unwrap();
        assert_eq!(summary.mbp_violations, 0);
        assert_eq!(summary.config_hash, config.hash());
    }

    #[test]
    fn snapshot_bytes_reproduce_across_runs() {
        let mut config = base_config(r#"{"type": "uniform", "n": 10}"#);
        config.output.snapshot_times = vec![1.0];
        config.output.snapshot_format = SnapshotFormat::Raw;
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_simulation(&config, Some(da.path())).unwrap();
        run_simulation(&config, Some(db.path())).unwrap();
        let a = std::fs::read(da.path().join("snapshot_000_t1.raw")).unwrap();
        let b = std::fs::read(db.path().join("snapshot_000_t1.raw")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn monitor_cutoff_truncates_the_energy_log() {
        let mut config = base_config(r#"{"type": "uniform", "n": 20}"#);
        config.output.energy_monitor_until = Some(0.5);
        let outcome = run_simulation(&config, None).unwrap();
        // initial record + steps with t <= 0.5
        assert_eq!(outcome.records.len(), 11);
        assert!(outcome.records.last().unwrap().t <= 0.5 + 1e-12);
    }

    #[test]
    fn manufactured_run_tracks_the_exact_solution() {
        let text = r#"{
            "model": {"eps2": 1e-4, "alpha": 0.3},
            "grid": {"dim": 2, "m": 16, "length": 6.283185307179586},
            "time": {"horizon": 1.0, "mesh": {"type": "graded", "n": 200, "gamma": 2.0}},
            "scheme": {"kind": "pc", "mode": "direct"},
            "initial": {"type": "manufactured", "mu": 0.5}
        }"#;
        let config = RunConfig::from_json_str(text).unwrap();
        let outcome = run_simulation(&config, None).unwrap();
        let case = ManufacturedCase::new(0.5).unwrap();
        let exact = case.exact_field(config.grid_spec().unwrap(), 1.0);
        let worst = outcome
            .final_field
            .data()
            .iter()
            .zip(exact.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 5e-3, "final-time error {worst}");
        assert_eq!(outcome.summary.mbp_violations, 0);
    }
}
