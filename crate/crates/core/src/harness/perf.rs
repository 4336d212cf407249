//! Lockstep comparison of the direct and fast history modes: identical
//! initial data and meshes, per-step wall times, and the pointwise
//! trajectory divergence introduced by the surrogate kernel.

use super::config::random_initial_field;
use crate::error::{KitError, Result};
use crate::schemes::{HistoryMode, ModelParams, SchemeKind, Stepper};
use crate::space_disc::GridSpec;
use crate::temporal_mesh::TemporalMesh;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub struct PerfSettings {
    pub dim: usize,
    pub m: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub alpha: f64,
    pub eps2: f64,
    pub soe_tol: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl PerfSettings {
    /// 1D workload exposing the history cost: the elliptic solve is cheap at
    /// M = 256 so per-step time tracks the convolution work.
    pub fn new(m: usize, n_steps: usize, alpha: f64, soe_tol: f64) -> Self {
        Self {
            dim: 1,
            m,
            n_steps,
            horizon: 1.0,
            alpha,
            eps2: 1e-3,
            soe_tol,
            amplitude: 0.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerfEntry {
    pub step: usize,
    pub t: f64,
    pub direct_seconds: f64,
    pub fast_seconds: f64,
    pub divergence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerfReport {
    pub dim: usize,
    pub m: usize,
    pub n_steps: usize,
    pub alpha: f64,
    pub soe_tol: f64,
    pub soe_nodes: usize,
    pub entries: Vec<PerfEntry>,
    pub max_divergence: f64,
    pub direct_total_seconds: f64,
    pub fast_total_seconds: f64,
    /// Window-min per-step fast cost, late (last 100 steps) over early
    /// (steps 10..110); ~1 when the per-step cost is flat.
    pub fast_flatness: f64,
    /// Window-mean per-step direct cost, late over early; grows with the
    /// step index because the convolution walks the whole history.
    pub direct_growth: f64,
    pub direct_memory_bytes: usize,
    pub fast_memory_bytes: usize,
}

fn window_min(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn window_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn run_perf_compare(settings: &PerfSettings) -> Result<PerfReport> {
    if settings.n_steps < 120 {
        return Err(KitError::InvalidArgument(format!(
            "the perf windows need at least 120 steps, got {}",
            settings.n_steps
        )));
    }
    let grid = GridSpec::new(settings.dim, settings.m, 1.0)?;
    let params = ModelParams::new(settings.eps2, settings.alpha, 2.0)?;
    let mesh = TemporalMesh::uniform(settings.horizon, settings.n_steps)?;
    let initial = random_initial_field(grid, settings.seed, settings.amplitude)?;

    let mut direct = Stepper::new(
        params,
        SchemeKind::PredictorCorrector,
        HistoryMode::Direct,
        initial.clone(),
        settings.horizon,
        None,
    )?;
    let mut fast = Stepper::new(
        params,
        SchemeKind::PredictorCorrector,
        HistoryMode::Fast { soe_tol: settings.soe_tol, delta: mesh.min_step() },
        initial,
        settings.horizon,
        None,
    )?;

    let mut entries = Vec::with_capacity(settings.n_steps);
    let mut max_divergence = 0.0f64;
    for n in 1..=settings.n_steps {
        let target = mesh.node(n);
        let tick = Instant::now();
        direct.step(target)?;
        let direct_seconds = tick.elapsed().as_secs_f64();
        let tick = Instant::now();
        fast.step(target)?;
        let fast_seconds = tick.elapsed().as_secs_f64();
        let divergence = direct
            .current()
            .data()
            .iter()
            .zip(fast.current().data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_divergence = max_divergence.max(divergence);
        entries.push(PerfEntry { step: n, t: target, direct_seconds, fast_seconds, divergence });
    }

    let early: Vec<f64> = entries[9..109].iter().map(|e| e.fast_seconds).collect();
    let late: Vec<f64> =
        entries[settings.n_steps - 100..].iter().map(|e| e.fast_seconds).collect();
    let fast_flatness = window_min(&late) / window_min(&early);
    let early_d: Vec<f64> = entries[9..109].iter().map(|e| e.direct_seconds).collect();
    let late_d: Vec<f64> =
        entries[settings.n_steps - 100..].iter().map(|e| e.direct_seconds).collect();
    let direct_growth = window_mean(&late_d) / window_mean(&early_d);

    let direct_total_seconds = entries.iter().map(|e| e.direct_seconds).sum();
    let fast_total_seconds = entries.iter().map(|e| e.fast_seconds).sum();
    Ok(PerfReport {
        dim: settings.dim,
        m: settings.m,
        n_steps: settings.n_steps,
        alpha: settings.alpha,
        soe_tol: settings.soe_tol,
        soe_nodes: fast.history_memory_bytes() / (grid.n_cells() * 8),
        entries,
        max_divergence,
        direct_total_seconds,
        fast_total_seconds,
        fast_flatness,
        direct_growth,
        direct_memory_bytes: direct.history_memory_bytes(),
        fast_memory_bytes: fast.history_memory_bytes(),
    })
}

pub fn write_perf_csv(path: &Path, report: &PerfReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,t,direct_seconds,fast_seconds,divergence")?;
    for e in &report.entries {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.step, e.t, e.direct_seconds, e.fast_seconds, e.divergence
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lockstep_runs_agree_closely_and_report_is_sound() {
        let settings = PerfSettings::new(64, 150, 0.5, 1e-10);
        let report = run_perf_compare(&settings).unwrap();
        assert_eq!(report.entries.len(), 150);
        assert!(report.max_divergence <= 1e-7, "{}", report.max_divergence);
        assert!(report.fast_flatness > 0.0);
        assert!(report.direct_growth > 0.0);
        assert!(report.direct_memory_bytes > report.fast_memory_bytes / 10);
        assert!(report.entries.iter().all(|e| e.direct_seconds > 0.0 && e.fast_seconds > 0.0));
    }

    #[test]
    fn too_short_ladders_are_rejected() {
        assert!(run_perf_compare(&PerfSettings::new(32, 60, 0.5, 1e-8)).is_err());
    }
}
