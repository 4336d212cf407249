//! Coarsening-dynamics runs: random small-amplitude initial data, composite
//! graded-then-uniform meshes, both structure monitors active. Thin layer
//! over the simulation driver plus the standard study configuration.

use super::config::{
    GridConfig, HistoryModeConfig, InitialConfig, MeshConfig, ModelConfig, OutputConfig,
    RunConfig, SchemeConfig, SchemeKindConfig, TimeConfig,
};
use super::run::{run_simulation, RunOutcome};
use crate::error::Result;
use std::path::Path;

/// Standard coarsening setup: 64^2 grid on (0,1)^2, eps2 = 1e-3, noise
/// amplitude 1e-3, predictor-corrector stepping on a composite mesh whose
/// graded head has 100 steps on [0, 0.1] with the order-recovering exponent
/// min(1+alpha, 2-alpha)/alpha, followed by a uniform tail of step tau_tail.
pub fn coarsening_config(alpha: f64, tau_tail: f64, horizon: f64, seed: u64) -> RunConfig {
    let gamma = (1.0 + alpha).min(2.0 - alpha) / alpha;
    RunConfig {
        model: ModelConfig { eps2: 1e-3, alpha, kappa: 2.0 },
        grid: GridConfig { dim: 2, m: 64, length: 1.0 },
        time: TimeConfig {
            horizon,
            mesh: MeshConfig::Composite { n_graded: 100, gamma, t_switch: 0.1, tau_tail },
        },
        scheme: SchemeConfig {
            kind: SchemeKindConfig::Pc,
            mode: HistoryModeConfig::Fast,
            soe_tol: 1e-6,
            soe_delta: None,
        },
        initial: InitialConfig::Random { amplitude: 0.001 },
        output: OutputConfig::default(),
        seed,
    }
}

/// Run a coarsening study described by `config`, writing the energy log,
/// snapshots and summary into `out_dir` when given.
pub fn run_coarsening(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    run_simulation(config, out_dir)
}
