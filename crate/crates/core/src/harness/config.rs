//! Run configuration: one serde schema accepted as JSON or TOML, plus the
//! builders that turn it into core objects and a content hash for
//! reproducibility stamping.

use crate::error::{KitError, Result};
use crate::schemes::{ModelParams, SchemeKind};
use crate::space_disc::{GridSpec, ScalarField};
use crate::temporal_mesh::{AdaptiveController, TemporalMesh};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub eps2: f64,
    pub alpha: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub m: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub mesh: MeshConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    Uniform {
        n: usize,
    },
    Graded {
        n: usize,
        gamma: f64,
    },
    /// Graded head on [0, t_switch], uniform tail of target step `tau_tail`.
    Composite {
        n_graded: usize,
        gamma: f64,
        #[serde(default = "default_t_switch")]
        t_switch: f64,
        tau_tail: f64,
    },
    Adaptive {
        tau_min: f64,
        tau_max: f64,
        #[serde(default = "default_gain")]
        gain: f64,
    },
}

fn default_t_switch() -> f64 {
    0.1
}

fn default_gain() -> f64 {
    1e5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKindConfig {
    Sfl1,
    Pc,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum HistoryModeConfig {
    #[default]
    Direct,
    Fast,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKindConfig,
    #[serde(default)]
    pub mode: HistoryModeConfig,
    #[serde(default = "default_soe_tol")]
    pub soe_tol: f64,
    /// Lower end of the surrogate window; defaults to the smallest mesh step.
    #[serde(default)]
    pub soe_delta: Option<f64>,
}

fn default_soe_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Uniform noise in [-amplitude, amplitude], one RNG stream per cell.
    Random {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    /// Separable cosine profile with exact source forcing; expects a
    /// 2-pi-long domain.
    Manufactured {
        mu: f64,
    },
}

fn default_amplitude() -> f64 {
    0.001
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self::Random { amplitude: default_amplitude() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    #[default]
    Vtk,
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Write every k-th energy row to CSV (monitoring itself is per-step).
    pub energy_log_every: usize,
    pub snapshot_times: Vec<f64>,
    pub snapshot_format: SnapshotFormat,
    /// Stop feeding the energy monitor after this time; None = whole run.
    /// Bounds the monitor's quadratically growing kernel triangle on very
    /// long meshes.
    pub energy_monitor_until: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            energy_log_every: 1,
            snapshot_times: Vec::new(),
            snapshot_format: SnapshotFormat::Vtk,
            energy_monitor_until: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| KitError::Config(format!("bad JSON config: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| KitError::Config(format!("bad TOML config: {e}")))
    }

    /// Dispatch on the file extension (.json or .toml).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            Some("toml") => Self::from_toml_str(&text),
            other => Err(KitError::Config(format!(
                "config must end in .json or .toml, got {other:?}"
            ))),
        }
    }

    /// Hex digest of the canonical JSON form; stamped into run summaries.
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.eps2, self.model.alpha, self.model.kappa)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.m, self.grid.length)
    }

    pub fn scheme_kind(&self) -> SchemeKind {
        match self.scheme.kind {
            SchemeKindConfig::Sfl1 => SchemeKind::StabilizedL1,
            SchemeKindConfig::Pc => SchemeKind::PredictorCorrector,
        }
    }

    /// Concrete node list for fixed meshes; None for adaptive runs.
    pub fn fixed_mesh(&self) -> Result<Option<TemporalMesh>> {
        let horizon = self.time.horizon;
        let mesh = match &self.time.mesh {
            MeshConfig::Uniform { n } => Some(TemporalMesh::uniform(horizon, *n)?),
            MeshConfig::Graded { n, gamma } => Some(TemporalMesh::graded(horizon, *n, *gamma)?),
            MeshConfig::Composite { n_graded, gamma, t_switch, tau_tail } => Some(
                TemporalMesh::composite(horizon, *n_graded, *gamma, *t_switch, *tau_tail)?,
            ),
            MeshConfig::Adaptive { .. } => None,
        };
        Ok(mesh)
    }

    pub fn adaptive_controller(&self) -> Result<Option<AdaptiveController>> {
        match &self.time.mesh {
            MeshConfig::Adaptive { tau_min, tau_max, gain } => {
                Ok(Some(AdaptiveController::new(*tau_min, *tau_max, *gain)?))
            }
            _ => Ok(None),
        }
    }

    /// Cross-field checks that individual constructors cannot see.
    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        self.grid_spec()?;
        if !(self.time.horizon > 0.0) || !self.time.horizon.is_finite() {
            return Err(KitError::Config(format!(
                "final time must be positive, got {}",
                self.time.horizon
            )));
        }
        self.fixed_mesh()?;
        self.adaptive_controller()?;
        if self.output.energy_log_every == 0 {
            return Err(KitError::Config(
                "energy_log_every must be at least 1".into(),
            ));
        }
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0 && t <= self.time.horizon) {
                return Err(KitError::Config(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.time.horizon
                )));
            }
        }
        if let InitialConfig::Manufactured { mu } = self.initial {
            if !(mu > 0.0) {
                return Err(KitError::Config(format!(
                    "manufactured regularity exponent must be positive, got {mu}"
                )));
            }
            let want = 2.0 * std::f64::consts::PI;
            if (self.grid.length - want).abs() > 1e-12 {
                return Err(KitError::Config(format!(
                    "the manufactured case uses unit-wavenumber cosines and needs \
                     domain length 2*pi, got {}",
                    self.grid.length
                )));
            }
        }
        if let InitialConfig::Constant { value } = self.initial {
            if value.abs() > 1.0 {
                return Err(KitError::Config(format!(
                    "constant initial value {value} violates the maximum bound"
                )));
            }
        }
        Ok(())
    }

    /// Smallest step of the configured mesh (adaptive: tau_min).
    pub fn min_step(&self) -> Result<f64> {
        match &self.time.mesh {
            MeshConfig::Adaptive { tau_min, .. } => Ok(*tau_min),
            _ => Ok(self.fixed_mesh()?.unwrap().min_step()),
        }
    }
}

/// 16-hex-character digest of a value's canonical JSON form; used to stamp
/// summaries with the settings that produced them.
pub fn content_hash<T: serde::Serialize>(value: &T) -> String {
    let canonical = serde_json::to_string(value).expect("settings serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Uniform noise in [-amplitude, amplitude] with one counter-mode RNG stream
/// per grid point: point i draws from stream i of a generator seeded with
/// `seed`. The field is reproducible from (seed, amplitude, grid) alone.
pub fn random_initial_field(grid: GridSpec, seed: u64, amplitude: f64) -> Result<ScalarField> {
    if !(amplitude > 0.0) || amplitude > 1.0 {
        return Err(KitError::Config(format!(
            "noise amplitude must lie in (0, 1], got {amplitude}"
        )));
    }
    let mut data = Vec::with_capacity(grid.n_cells());
    for idx in 0..grid.n_cells() {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        data.push(rng.gen_range(-amplitude..amplitude));
    }
    ScalarField::from_data(grid, data)
}
