//! Direct spectral solver for (sigma I - eps2 Delta_h) u = rhs on the Neumann
//! grid, diagonalised per axis by the DCT; plus a matrix-free conjugate
//! gradient fallback for cross-checking and non-power-of-two grids where FFT
//! performance might degrade (rustfft handles those fine, so the CG path is
//! primarily a correctness oracle and escape hatch).

use super::transform::DctPlan;
use super::{axis_eigenvalue, axis_strides, laplacian_apply, line_starts, GridSpec, ScalarField};
use crate::error::{KitError, Result};

pub struct HelmholtzSolver {
    grid: GridSpec,
    plan: DctPlan,
    eigen: Vec<f64>,
}

impl HelmholtzSolver {
    pub fn new(grid: GridSpec) -> Self {
        let eigen = (0..grid.m()).map(|k| axis_eigenvalue(&grid, k)).collect();
        Self { grid, plan: DctPlan::new(grid.m()), eigen }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Solve (sigma I - eps2 Delta_h) u = rhs in place of `u`.
    pub fn solve_into(&mut self, sigma: f64, eps2: f64, rhs: &[f64], u: &mut [f64]) -> Result<()> {
        if rhs.len() != self.grid.n_cells() || u.len() != self.grid.n_cells() {
            return Err(KitError::GridMismatch(format!(
                "solver grid has {} cells, got rhs {} / out {}",
                self.grid.n_cells(),
                rhs.len(),
                u.len()
            )));
        }
        if !(sigma > 0.0) {
            return Err(KitError::InvalidArgument(format!(
                "shift must be positive to keep the operator invertible, got {sigma}"
            )));
        }
        if eps2 < 0.0 {
            return Err(KitError::InvalidArgument(format!(
                "diffusion coefficient must be nonnegative, got {eps2}"
            )));
        }
        u.copy_from_slice(rhs);
        let strides = axis_strides(&self.grid);
        for &stride in &strides {
            for start in line_starts(&self.grid, stride) {
                self.plan.dct2_strided(u, start, stride);
            }
        }
        let m = self.grid.m();
        for idx in 0..u.len() {
            let (i, j, k) = self.grid.unravel(idx);
            let mut lambda = self.eigen[i];
            if self.grid.dim() >= 2 {
                lambda += self.eigen[j];
            }
            if self.grid.dim() == 3 {
                lambda += self.eigen[k % m];
            }
            u[idx] /= sigma - eps2 * lambda;
        }
        for &stride in &strides {
            for start in line_starts(&self.grid, stride) {
                self.plan.dct3_strided(u, start, stride);
            }
        }
        Ok(())
    }

    pub fn solve(&mut self, sigma: f64, eps2: f64, rhs: &ScalarField) -> Result<ScalarField> {
        let mut out = ScalarField::zeros(self.grid);
        self.solve_into(sigma, eps2, rhs.data(), out.data_mut())?;
        Ok(out)
    }
}

/// Jacobi-preconditioned conjugate gradients on the same operator.
/// Returns the solution and the iteration count; converges to
/// ||r|| <= tol * ||rhs|| or errors out.
pub fn solve_cg(
    grid: &GridSpec,
    sigma: f64,
    eps2: f64,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    if !(sigma > 0.0) {
        return Err(KitError::InvalidArgument(format!(
            "shift must be positive, got {sigma}"
        )));
    }
    let n = grid.n_cells();
    if rhs.len() != n {
        return Err(KitError::GridMismatch(format!(
            "grid has {n} cells, rhs has {}",
            rhs.len()
        )));
    }
    let m = grid.m();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    // diagonal of the operator: sigma + eps2 * (#neighbours) / h^2
    let mut diag = vec![sigma; n];
    for &stride in &axis_strides(grid) {
        for start in line_starts(grid, stride) {
            for i in 0..m {
                let nb = if i == 0 || i == m - 1 { 1.0 } else { 2.0 };
                diag[start + i * stride] += eps2 * nb * inv_h2;
            }
        }
    }
    let apply = |x: &[f64], lap: &mut [f64], out: &mut [f64]| {
        laplacian_apply(grid, x, lap);
        for i in 0..x.len() {
            out[i] = sigma * x[i] - eps2 * lap[i];
        }
    };
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut lap = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for iter in 1..=max_iter {
        apply(&p, &mut lap, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * rhs_norm {
            return Ok((x, iter));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(KitError::Solver(format!(
        "conjugate gradients stalled after {max_iter} iterations"
    )))
}
