//! Discrete free energy and the variational energy monitor.
//!
//! The free energy is E_h[phi] = (eps2/2) |phi|_{H1}^2 + h^d sum F(phi).
//! The monitored quantity augments it with half the weighted square norms of
//! the discrete fractional derivative,
//!   total^n = E_h[phi^n] + (1/2) sum_{m=1}^{n} p^{(n-1)}_{n-m} ||L phi^m||^2,
//! where p are the complementary kernel sums of the active weight family
//! (exact weights in direct mode, surrogate weights in fast mode). The 1/2
//! mirrors the continuous definition and is what the summation-by-parts
//! inequality for the kernels supports; with it the quantity is nonincreasing
//! step over step and never drops below E_h.
//!
//! The complementary sums are never materialised. Writing the weight rows as a
//! lower-triangular matrix A and the square norms as a vector l, the history
//! sum after n steps equals the prefix sum of V = A^{-1} l, because the
//! complementary sums are the column sums of A^{-1}. V is produced by forward
//! substitution as steps arrive: O(n) work per step against the exact rows,
//! O(nodes) per step against the surrogate rows, whose entries factor through
//! the exponential nodes exactly like the stepper's running history.

use crate::error::{KitError, Result};
use crate::l1_kernels::l1_weight_row_from_nodes;
use crate::schemes::{ModelParams, StepReport};
use crate::soe::{interval_average_decay, SoeApproximation};
use crate::space_disc::{h1_seminorm_sq, ScalarField};
use statrs::function::gamma::gamma;

/// Relative slack allowed on the step-over-step decrease.
pub const ENERGY_TOLERANCE: f64 = 1e-10;

/// E_h[phi] = (eps2/2) |phi|_{H1}^2 + h^d sum F(phi).
pub fn free_energy(params: &ModelParams, phi: &ScalarField) -> f64 {
    let grid = phi.grid();
    let gradient = 0.5 * params.eps2 * h1_seminorm_sq(&grid, phi.data());
    let weight = grid.spacing().powi(grid.dim() as i32);
    let mut well = 0.0;
    for &v in phi.data() {
        well += params.potential(v);
    }
    gradient + weight * well
}

#[derive(Debug, Clone)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub sup_norm: f64,
    pub free_energy: f64,
    pub total_energy: f64,
    /// total^n - total^{n-1}; 0 for the initial record.
    pub delta_total: f64,
}

enum RowSource {
    Exact {
        alpha: f64,
    },
    /// Per-node running sums sum_k exp(-rate (t_now - t_{k+1})) b(tau_k) V_k,
    /// decayed across each new step; their weighted total reproduces the
    /// surrogate-row convolution against V without forming any row.
    Surrogate {
        rates: Vec<f64>,
        weights: Vec<f64>,
        alpha: f64,
        node_state: Vec<f64>,
    },
}

pub struct EnergyMonitor {
    rows: RowSource,
    times: Vec<f64>,
    /// V_j from the forward substitution (sign-indefinite; only the prefix
    /// sums are nonnegative).
    history_values: Vec<f64>,
    weighted_sum: f64,
    min_weighted_sum: f64,
    records: Vec<EnergyRecord>,
    violations: usize,
    lower_bound_violations: usize,
    worst_increase: f64,
}

impl EnergyMonitor {
    /// Monitor a direct-mode run with the exact convolution weights.
    pub fn new_direct(alpha: f64, initial_free_energy: f64, initial_sup: f64) -> Self {
        Self::new(RowSource::Exact { alpha }, initial_free_energy, initial_sup)
    }

    /// Monitor a fast-mode run; the rows come from the surrogate family so
    /// the monitored law matches what the stepper actually discretises.
    pub fn new_fast(soe: &SoeApproximation, initial_free_energy: f64, initial_sup: f64) -> Self {
        Self::new(
            RowSource::Surrogate {
                rates: soe.rates().to_vec(),
                weights: soe.weights().to_vec(),
                alpha: soe.alpha(),
                node_state: vec![0.0; soe.rates().len()],
            },
            initial_free_energy,
            initial_sup,
        )
    }

    fn new(rows: RowSource, initial_free_energy: f64, initial_sup: f64) -> Self {
        Self {
            rows,
            times: vec![0.0],
            history_values: Vec::new(),
            weighted_sum: 0.0,
            min_weighted_sum: 0.0,
            records: vec![EnergyRecord {
                step: 0,
                t: 0.0,
                tau: 0.0,
                sup_norm: initial_sup,
                free_energy: initial_free_energy,
                total_energy: initial_free_energy,
                delta_total: 0.0,
            }],
            violations: 0,
            lower_bound_violations: 0,
            worst_increase: f64::NEG_INFINITY,
        }
    }

    /// Absorb one accepted step and return its record.
    pub fn push_step(&mut self, report: &StepReport, free_energy: f64) -> Result<EnergyRecord> {
        let expected_t = self.times.last().unwrap() + report.tau;
        if (report.t - expected_t).abs() > 1e-12 * report.t.abs().max(1.0) {
            return Err(KitError::Precondition(format!(
                "step report at t = {} does not extend the monitored mesh ending at {}",
                report.t,
                self.times.last().unwrap()
            )));
        }
        self.times.push(report.t);
        let n = self.times.len() - 1;
        let value = match &mut self.rows {
            RowSource::Exact { alpha } => {
                let row = l1_weight_row_from_nodes(&self.times, *alpha)?;
                debug_assert_eq!(row.len(), n);
                let mut conv = 0.0;
                for (k, v) in self.history_values.iter().enumerate() {
                    conv += row[n - 1 - k] * v;
                }
                (report.lalpha_sq - conv) / row[0]
            }
            RowSource::Surrogate { rates, weights, alpha, node_state } => {
                let tau = report.tau;
                let mut conv = 0.0;
                for ((state, rate), weight) in node_state.iter_mut().zip(&*rates).zip(&*weights) {
                    *state *= (-rate * tau).exp();
                    conv += weight * *state;
                }
                let a0 = tau.powf(1.0 - *alpha) / (gamma(2.0 - *alpha) * tau);
                let value = (report.lalpha_sq - conv) / a0;
                for (state, rate) in node_state.iter_mut().zip(&*rates) {
                    *state += interval_average_decay(*rate, tau) * value;
                }
                value
            }
        };
        self.history_values.push(value);
        self.weighted_sum += value;
        self.min_weighted_sum = self.min_weighted_sum.min(self.weighted_sum);

        let total = free_energy + 0.5 * self.weighted_sum;
        let previous = self.records.last().unwrap().total_energy;
        let delta = total - previous;
        let increase = delta / previous.abs().max(1.0);
        self.worst_increase = self.worst_increase.max(increase);
        if increase > ENERGY_TOLERANCE {
            self.violations += 1;
        }
        if total < free_energy - 1e-12 * free_energy.abs().max(1.0) {
            self.lower_bound_violations += 1;
        }
        let record = EnergyRecord {
            step: n,
            t: report.t,
            tau: report.tau,
            sup_norm: report.sup_norm,
            free_energy,
            total_energy: total,
            delta_total: delta,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn lower_bound_violations(&self) -> usize {
        self.lower_bound_violations
    }

    /// Largest relative step-over-step increase seen (negative when the law
    /// held strictly).
    pub fn worst_increase(&self) -> f64 {
        self.worst_increase
    }

    /// Smallest weighted history sum seen. The complementary kernel sums and
    /// the square norms are both nonnegative, so a materially negative value
    /// flags a broken weight family.
    pub fn min_weighted_sum(&self) -> f64 {
        self.min_weighted_sum
    }

    /// Bytes retained by the monitor; linear in the number of steps.
    pub fn memory_bytes(&self) -> usize {
        let node_state = match &self.rows {
            RowSource::Exact { .. } => 0,
            RowSource::Surrogate { node_state, .. } => node_state.len(),
        };
        (self.times.len() + self.history_values.len() + node_state) * std::mem::size_of::<f64>()
    }
}
