//! Python bindings for the solver kit: kernel rows and their audit triangle,
//! the exponential-sum surrogate, the spectral Helmholtz solve, and the two
//! study drivers (coarsening runs from a JSON config, convergence ladders).
//! Results come back as plain lists and small result classes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use tfac_core::error::KitError;
use tfac_core::harness::coarsening;
use tfac_core::harness::config::RunConfig;
use tfac_core::harness::convergence::{self, ConvergenceSettings};
use tfac_core::l1_kernels::{self, KernelTriangle, Retention};
use tfac_core::schemes::SchemeKind;
use tfac_core::soe::{self, SoeApproximation};
use tfac_core::space_disc::helmholtz::HelmholtzSolver;
use tfac_core::space_disc::{self, GridSpec, ScalarField};

fn kit(e: KitError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid(dim: usize, m: usize, length: f64) -> PyResult<GridSpec> {
    GridSpec::new(dim, m, length).map_err(kit)
}

/// Graded mesh nodes t_k = horizon * (k/n)^gamma, k = 0..=n.
#[pyfunction]
fn graded_mesh(horizon: f64, n: usize, gamma: f64) -> PyResult<Vec<f64>> {
    let mesh = tfac_core::temporal_mesh::TemporalMesh::graded(horizon, n, gamma).map_err(kit)?;
    Ok((0..=mesh.n_steps()).map(|k| mesh.node(k)).collect())
}

/// Convolution weight row of the piecewise-linear kernel discretization for
/// the step ending at the last node.
#[pyfunction]
fn l1_weight_row(nodes: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    l1_kernels::l1_weight_row_from_nodes(&nodes, alpha).map_err(kit)
}

/// Weight triangle over a full mesh with its inverse (doc) and
/// complementary (dcc) kernel rows and the two identity residuals.
#[pyclass]
struct Triangle {
    inner: KernelTriangle,
}

#[pymethods]
impl Triangle {
    #[new]
    fn new(nodes: Vec<f64>, alpha: f64) -> PyResult<Self> {
        let mut inner = KernelTriangle::new(Retention::Full);
        for j in 2..=nodes.len() {
            inner
                .push_row(l1_kernels::l1_weight_row_from_nodes(&nodes[..j], alpha).map_err(kit)?)
                .map_err(kit)?;
        }
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn weight_row(&self, n: usize) -> Vec<f64> {
        self.inner.weight_row(n).to_vec()
    }

    fn doc_row(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.theta_row(n).map_err(kit)?.to_vec())
    }

    fn dcc_row(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.dcc_row(n).map_err(kit)?.to_vec())
    }

    fn delta_residual(&self, n: usize, k: usize) -> PyResult<f64> {
        self.inner.delta_residual(n, k).map_err(kit)
    }

    fn partition_residual(&self, n: usize, k: usize) -> PyResult<f64> {
        self.inner.partition_residual(n, k).map_err(kit)
    }

    fn min_dcc(&self) -> f64 {
        self.inner.min_dcc()
    }
}

/// Certified exponential-sum surrogate of the singular kernel on
/// [delta, horizon].
#[pyclass]
struct Surrogate {
    inner: SoeApproximation,
}

#[pymethods]
impl Surrogate {
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    fn certified_error(&self) -> f64 {
        self.inner.certified_error()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn rates(&self) -> Vec<f64> {
        self.inner.rates().to_vec()
    }

    fn eval(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    fn scan_error(&self, points: usize) -> f64 {
        self.inner.scan_error(points)
    }
}

#[pyfunction]
fn build_soe(alpha: f64, tolerance: f64, delta: f64, horizon: f64) -> PyResult<Surrogate> {
    Ok(Surrogate { inner: soe::build_soe(alpha, tolerance, delta, horizon).map_err(kit)? })
}

/// Exact kernel t^(-alpha) / Gamma(1 - alpha) the surrogate approximates.
#[pyfunction]
fn exact_kernel(alpha: f64, t: f64) -> f64 {
    soe::exact_kernel(alpha, t)
}

/// Solve (sigma - eps2 * laplacian) u = rhs on the cell-centered grid;
/// rhs runs x-fastest.
#[pyfunction]
fn helmholtz_solve(
    dim: usize,
    m: usize,
    length: f64,
    sigma: f64,
    eps2: f64,
    rhs: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let grid = grid(dim, m, length)?;
    let rhs = ScalarField::from_data(grid, rhs).map_err(kit)?;
    let mut solver = HelmholtzSolver::new(grid);
    Ok(solver.solve(sigma, eps2, &rhs).map_err(kit)?.data().to_vec())
}

/// Apply the homogeneous-Neumann Laplacian stencil.
#[pyfunction]
fn laplacian(dim: usize, m: usize, length: f64, u: Vec<f64>) -> PyResult<Vec<f64>> {
    let grid = grid(dim, m, length)?;
    if u.len() != grid.n_cells() {
        return Err(PyValueError::new_err(format!(
            "field has {} values, grid has {} cells",
            u.len(),
            grid.n_cells()
        )));
    }
    let mut out = vec![0.0; u.len()];
    space_disc::laplacian_apply(&grid, &u, &mut out);
    Ok(out)
}

/// Outcome of a configured simulation: per-step monitor log plus the final
/// field (x-fastest order).
#[pyclass]
struct RunResult {
    #[pyo3(get)]
    mbp_violations: usize,
    #[pyo3(get)]
    energy_violations: usize,
    #[pyo3(get)]
    wall_time: f64,
    #[pyo3(get)]
    times: Vec<f64>,
    #[pyo3(get)]
    sup_norms: Vec<f64>,
    #[pyo3(get)]
    free_energy: Vec<f64>,
    #[pyo3(get)]
    total_energy: Vec<f64>,
    #[pyo3(get)]
    final_field: Vec<f64>,
    #[pyo3(get)]
    warnings: Vec<String>,
}

/// Run a simulation described by the same JSON document the command line
/// accepts; artifacts are written when out_dir is given.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None))]
fn run_simulation(config_json: &str, out_dir: Option<String>) -> PyResult<RunResult> {
    let config: RunConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("bad run config: {e}")))?;
    let outcome = coarsening::run_coarsening(&config, out_dir.as_deref().map(std::path::Path::new))
        .map_err(kit)?;
    Ok(RunResult {
        mbp_violations: outcome.summary.mbp_violations,
        energy_violations: outcome.summary.energy_violations,
        wall_time: outcome.summary.wall_time,
        times: outcome.times.clone(),
        sup_norms: outcome.records.iter().map(|r| r.sup_norm).collect(),
        free_energy: outcome.records.iter().map(|r| r.free_energy).collect(),
        total_energy: outcome.records.iter().map(|r| r.total_energy).collect(),
        final_field: outcome.final_field.data().to_vec(),
        warnings: outcome.warnings,
    })
}

/// One temporal convergence ladder against the manufactured solution.
#[pyclass]
struct ConvergenceResult {
    #[pyo3(get)]
    scheme: String,
    #[pyo3(get)]
    entries: Vec<(usize, f64, f64)>,
    #[pyo3(get)]
    slope: f64,
    #[pyo3(get)]
    monotone: bool,
}

#[pyfunction]
#[pyo3(signature = (alpha, mu, gamma, scheme, ladder = None, grid_m = 64, eps2 = 1e-4, soe_tol = 1e-9))]
#[allow(clippy::too_many_arguments)]
fn run_convergence(
    alpha: f64,
    mu: f64,
    gamma: f64,
    scheme: &str,
    ladder: Option<Vec<usize>>,
    grid_m: usize,
    eps2: f64,
    soe_tol: f64,
) -> PyResult<ConvergenceResult> {
    let kind = match scheme {
        "sfl1" => SchemeKind::StabilizedL1,
        "pc" => SchemeKind::PredictorCorrector,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scheme {other:?}; expected \"sfl1\" or \"pc\""
            )))
        }
    };
    let mut settings = ConvergenceSettings::new(alpha, mu, gamma, kind);
    if let Some(ladder) = ladder {
        settings.ladder = ladder;
    }
    settings.grid_m = grid_m;
    settings.eps2 = eps2;
    settings.soe_tol = soe_tol;
    let report = convergence::run_convergence(&settings).map_err(kit)?;
    Ok(ConvergenceResult {
        scheme: report.scheme,
        entries: report.entries.iter().map(|e| (e.n, e.tau_max, e.error)).collect(),
        slope: report.slope,
        monotone: report.monotone,
    })
}

/// Mesh grading exponent recovering the scheme's full order for solutions
/// behaving like t^mu near zero.
#[pyfunction]
fn optimal_gamma(alpha: f64, mu: f64) -> f64 {
    convergence::optimal_gamma(alpha, mu)
}

#[pymodule]
fn tfac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(graded_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(l1_weight_row, m)?)?;
    m.add_function(wrap_pyfunction!(build_soe, m)?)?;
    m.add_function(wrap_pyfunction!(exact_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(helmholtz_solve, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_gamma, m)?)?;
    m.add_class::<Triangle>()?;
    m.add_class::<Surrogate>()?;
    m.add_class::<RunResult>()?;
    m.add_class::<ConvergenceResult>()?;
    Ok(())
}
