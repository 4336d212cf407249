//! File emitters: energy CSV, legacy-VTK and raw snapshots, kernel and
//! surrogate audit tables, and the per-run JSON summary. Floating-point
//! columns use Rust's shortest round-trip decimal formatting.

use crate::energy::EnergyRecord;
use crate::error::{KitError, Result};
use crate::l1_kernels::KernelTriangle;
use crate::soe::{exact_kernel, SoeApproximation};
use crate::space_disc::ScalarField;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
    pub mbp_violations: usize,
    pub energy_violations: usize,
    pub wall_time: f64,
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| KitError::Config(format!("summary serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary_json(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| KitError::Config(format!("bad summary JSON: {e}")))
}

/// Columns: step,t,tau,sup_norm,E_h,E_alpha,dE_alpha. Every `every`-th row
/// plus the final row.
pub fn write_energy_csv(path: &Path, records: &[EnergyRecord], every: usize) -> Result<()> {
    let every = every.max(1);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,t,tau,sup_norm,E_h,E_alpha,dE_alpha")?;
    let last = records.len().saturating_sub(1);
    for (i, r) in records.iter().enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step, r.t, r.tau, r.sup_norm, r.free_energy, r.total_energy, r.delta_total
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK structured points; cell centers become points, so the
/// origin sits at h/2 along each active axis.
pub fn write_vtk(path: &Path, field: &ScalarField, t: f64) -> Result<()> {
    let grid = field.grid();
    let h = grid.spacing();
    let m = grid.m();
    let (nx, ny, nz) = match grid.dim() {
        1 => (m, 1, 1),
        2 => (m, m, 1),
        _ => (m, m, m),
    };
    let oy = if grid.dim() >= 2 { 0.5 * h } else { 0.0 };
    let oz = if grid.dim() == 3 { 0.5 * h } else { 0.0 };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "phase field at t={t}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(out, "ORIGIN {} {} {}", 0.5 * h, oy, oz)?;
    writeln!(out, "SPACING {h} {h} {h}")?;
    writeln!(out, "POINT_DATA {}", grid.n_cells())?;
    writeln!(out, "SCALARS phi double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in field.data() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSidecar {
    pub dim: usize,
    pub m: usize,
    pub length: f64,
    pub t: f64,
    pub order: String,
}

/// Append a dotted suffix without interpreting existing dots in the name
/// (with_extension would truncate bases like "snapshot_t0.5").
fn with_suffix(base: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = base.to_path_buf().into_os_string();
    s.push(".");
    s.push(suffix);
    s.into()
}

/// Little-endian f64 dump plus a JSON sidecar describing the layout.
pub fn write_raw(path_base: &Path, field: &ScalarField, t: f64) -> Result<()> {
    let grid = field.grid();
    let mut bytes = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(with_suffix(path_base, "raw"), bytes)?;
    let sidecar = RawSidecar {
        dim: grid.dim(),
        m: grid.m(),
        length: grid.length(),
        t,
        order: "x-fastest".into(),
    };
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| KitError::Config(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(with_suffix(path_base, "json"), text + "\n")?;
    Ok(())
}

pub fn read_raw(path_base: &Path) -> Result<(RawSidecar, Vec<f64>)> {
    let text = std::fs::read_to_string(with_suffix(path_base, "json"))?;
    let sidecar: RawSidecar =
        serde_json::from_str(&text).map_err(|e| KitError::Config(format!("bad sidecar: {e}")))?;
    let bytes = std::fs::read(with_suffix(path_base, "raw"))?;
    if bytes.len() % 8 != 0 {
        return Err(KitError::Config("raw payload is not a whole number of f64".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((sidecar, data))
}

/// Kernel audit table: weights, inverse and complementary kernels, and the
/// two identity residuals, row by row over the whole triangle.
pub fn write_kernel_check_csv(path: &Path, triangle: &KernelTriangle) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "n,k,a,theta,p,delta_residual,partition_residual")?;
    for n in 0..triangle.len() {
        let weights = triangle.weight_row(n);
        let theta = triangle.theta_row(n)?;
        let dcc = triangle.dcc_row(n)?;
        for k in 0..=n {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                n,
                k,
                weights[n - k],
                theta[n - k],
                dcc[n - k],
                triangle.delta_residual(n, k)?,
                triangle.partition_residual(n, k)?
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoeCheckSummary {
    pub alpha: f64,
    pub tolerance: f64,
    pub delta: f64,
    pub horizon: f64,
    pub n_nodes: usize,
    pub max_error: f64,
}

/// Pointwise surrogate audit on a geometric scan: t, exact kernel, surrogate
/// value, absolute error; plus a JSON summary next to it.
pub fn write_soe_check(dir: &Path, soe: &SoeApproximation, points: usize) -> Result<f64> {
    let n = points.max(2);
    let ratio = soe.horizon() / soe.delta();
    let mut worst: f64 = 0.0;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("soe_check.csv"))?);
    writeln!(out, "t,exact_kernel,soe_value,abs_error")?;
    for j in 0..n {
        let t = soe.delta() * ratio.powf(j as f64 / (n - 1) as f64);
        let exact = exact_kernel(soe.alpha(), t);
        let value = soe.eval(t);
        let err = (value - exact).abs();
        worst = worst.max(err);
        writeln!(out, "{t},{exact},{value},{err}")?;
    }
    drop(out);
    let summary = SoeCheckSummary {
        alpha: soe.alpha(),
        tolerance: soe.tolerance(),
        delta: soe.delta(),
        horizon: soe.horizon(),
        n_nodes: soe.n_nodes(),
        max_error: worst,
    };
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| KitError::Config(format!("summary serialization failed: {e}")))?;
    std::fs::write(dir.join("soe_summary.json"), text + "\n")?;
    Ok(worst)
}
