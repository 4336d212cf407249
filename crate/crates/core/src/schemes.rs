//! Time stepping for the stabilized variable-step L1 discretisation of the
//! fractional Allen-Cahn flow and its predictor-corrector refinement.
//!
//! Per step the scheme solves
//!   (a0 + kappa) u - eps2 Delta_h u = a0 phi^n - H^n - f_kappa(phi_expl) + s
//! with a0 the leading convolution weight of the current step, H^n the
//! convolution history of earlier backward differences, and
//! f_kappa(v) = v^3 - (1 + kappa) v the stabilized explicit part. The
//! predictor-corrector variant re-solves once with phi_expl replaced by the
//! predictor; both solves share one history term, so each step costs exactly
//! one (or exactly two) Helmholtz solves.

use crate::error::{KitError, Result};
use crate::l1_kernels::l1_weight_row_from_nodes;
use crate::soe::{build_soe, SoeApproximation, SoeHistory};
use crate::space_disc::helmholtz::HelmholtzSolver;
use crate::space_disc::{inner_product, GridSpec, ScalarField};
use statrs::function::gamma::gamma;

/// Pointwise tolerance on the discrete maximum bound |phi| <= 1.
pub const MBP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    StabilizedL1,
    PredictorCorrector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryMode {
    /// Store every field and evaluate the convolution exactly.
    Direct,
    /// Sum-of-exponentials surrogate with recursive auxiliary buffers.
    /// `delta` must lower-bound every step the mesh will take.
    Fast { soe_tol: f64, delta: f64 },
}

/// Double-well model parameters. `kappa` is the stabilization constant; the
/// maximum-bound theory wants kappa >= 2 (the Lipschitz bound of phi^3 - phi
/// on [-1, 1]), smaller values are accepted but flagged.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub eps2: f64,
    pub alpha: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(eps2: f64, alpha: f64, kappa: f64) -> Result<Self> {
        if !(eps2 > 0.0) || !eps2.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "interface parameter eps2 must be positive, got {eps2}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(KitError::InvalidArgument(format!(
                "fractional order must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "stabilization constant must be positive, got {kappa}"
            )));
        }
        Ok(Self { eps2, alpha, kappa })
    }

    pub fn stabilization_warning(&self) -> Option<String> {
        (self.kappa < 2.0).then(|| {
            format!(
                "stabilization constant {} is below 2; the discrete maximum \
                 bound is not guaranteed",
                self.kappa
            )
        })
    }

    /// Nonlinearity f(v) = v^3 - v.
    pub fn reaction(&self, v: f64) -> f64 {
        v * v * v - v
    }

    /// Explicit stabilized part f_kappa(v) = v^3 - (1 + kappa) v.
    pub fn reaction_stabilized(&self, v: f64) -> f64 {
        v * v * v - (1.0 + self.kappa) * v
    }

    /// Double-well density F(v) = (v^2 - 1)^2 / 4.
    pub fn potential(&self, v: f64) -> f64 {
        let w = v * v - 1.0;
        0.25 * w * w
    }
}

/// Optional forcing term s(t, x, y, z) evaluated at cell centers.
pub type SourceFn = Box<dyn Fn(f64, f64, f64, f64) -> f64 + Send>;

pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub sup_norm: f64,
    pub predictor_sup: Option<f64>,
    /// Squared L2 norm of the discrete fractional derivative of the new state.
    pub lalpha_sq: f64,
    pub mbp_violation: bool,
}

enum HistoryState {
    Direct { fields: Vec<Vec<f64>> },
    Fast { history: SoeHistory },
}

pub struct Stepper {
    params: ModelParams,
    kind: SchemeKind,
    grid: GridSpec,
    solver: HelmholtzSolver,
    times: Vec<f64>,
    current: ScalarField,
    history: HistoryState,
    fast_delta: f64,
    source: Option<SourceFn>,
    lalpha_log: Vec<f64>,
    solve_count: usize,
    mbp_violations: usize,
    predictor_sup_max: f64,
    warnings: Vec<String>,
    work: Vec<f64>,
    rhs: Vec<f64>,
    next: Vec<f64>,
    src: Vec<f64>,
}

impl Stepper {
    /// `horizon` is the final time the run will reach; the fast mode sizes its
    /// surrogate window [delta, horizon] from it.
    pub fn new(
        params: ModelParams,
        kind: SchemeKind,
        mode: HistoryMode,
        initial: ScalarField,
        horizon: f64,
        source: Option<SourceFn>,
    ) -> Result<Self> {
        match mode {
            HistoryMode::Direct => {
                Self::build(params, kind, None, initial, horizon, source)
            }
            HistoryMode::Fast { soe_tol, delta } => {
                let soe = build_soe(params.alpha, soe_tol, delta, horizon)?;
                Self::build(params, kind, Some(&soe), initial, horizon, source)
            }
        }
    }

    /// Fast-mode stepper over a caller-built surrogate (so the caller can
    /// pick its own certification policy and reuse the surrogate elsewhere,
    /// e.g. for the energy monitor).
    pub fn with_surrogate(
        params: ModelParams,
        kind: SchemeKind,
        soe: &SoeApproximation,
        initial: ScalarField,
        horizon: f64,
        source: Option<SourceFn>,
    ) -> Result<Self> {
        if (soe.alpha() - params.alpha).abs() > 1e-15 {
            return Err(KitError::Precondition(format!(
                "surrogate was built for order {}, model has {}",
                soe.alpha(),
                params.alpha
            )));
        }
        if horizon > soe.horizon() * (1.0 + 1e-12) {
            return Err(KitError::Precondition(format!(
                "surrogate window ends at {}, run wants {horizon}",
                soe.horizon()
            )));
        }
        Self::build(params, kind, Some(soe), initial, horizon, source)
    }

    fn build(
        params: ModelParams,
        kind: SchemeKind,
        soe: Option<&SoeApproximation>,
        initial: ScalarField,
        horizon: f64,
        source: Option<SourceFn>,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "final time must be positive and finite, got {horizon}"
            )));
        }
        let sup = initial.norm_max();
        if sup > 1.0 + MBP_TOLERANCE {
            return Err(KitError::Precondition(format!(
                "initial data violates the maximum bound: sup {sup} > 1; \
                 refusing to clamp"
            )));
        }
        let grid = initial.grid();
        let n = grid.n_cells();
        let mut warnings = Vec::new();
        if let Some(w) = params.stabilization_warning() {
            warnings.push(w);
        }
        let (history, fast_delta) = match soe {
            None => (
                HistoryState::Direct { fields: vec![initial.data().to_vec()] },
                0.0,
            ),
            Some(soe) => (
                HistoryState::Fast { history: SoeHistory::new(soe, n) },
                soe.delta(),
            ),
        };
        Ok(Self {
            params,
            kind,
            grid,
            solver: HelmholtzSolver::new(grid),
            times: vec![0.0],
            current: initial,
            history,
            fast_delta,
            source,
            lalpha_log: Vec::new(),
            solve_count: 0,
            mbp_violations: 0,
            predictor_sup_max: 0.0,
            warnings,
            work: vec![0.0; n],
            rhs: vec![0.0; n],
            next: vec![0.0; n],
            src: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps_taken(&self) -> usize {
        self.times.len() - 1
    }

    pub fn current(&self) -> &ScalarField {
        &self.current
    }

    pub fn solve_count(&self) -> usize {
        self.solve_count
    }

    pub fn mbp_violations(&self) -> usize {
        self.mbp_violations
    }

    /// Largest predictor sup norm seen (predictor-corrector only).
    pub fn predictor_sup_max(&self) -> f64 {
        self.predictor_sup_max
    }

    /// Squared fractional-derivative norms, one entry per accepted step.
    pub fn lalpha_log(&self) -> &[f64] {
        &self.lalpha_log
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Bytes held by the convolution history (not counting the current state).
    pub fn history_memory_bytes(&self) -> usize {
        match &self.history {
            HistoryState::Direct { fields } => {
                fields.len() * self.grid.n_cells() * std::mem::size_of::<f64>()
            }
            HistoryState::Fast { history } => history.memory_bytes(),
        }
    }

    /// Retained fields in direct mode (newest last); None in fast mode.
    pub fn stored_fields(&self) -> Option<&[Vec<f64>]> {
        match &self.history {
            HistoryState::Direct { fields } => Some(fields),
            HistoryState::Fast { .. } => None,
        }
    }

    fn evaluate_source(&mut self, t: f64) {
        if let Some(f) = &self.source {
            let g = &self.grid;
            for idx in 0..g.n_cells() {
                let (i, j, k) = g.unravel(idx);
                let x = g.coordinate(i);
                let y = if g.dim() >= 2 { g.coordinate(j) } else { 0.0 };
                let z = if g.dim() == 3 { g.coordinate(k) } else { 0.0 };
                self.src[idx] = f(t, x, y, z);
            }
        } else {
            self.src.fill(0.0);
        }
    }

    /// Advance to `t_next`, returning the per-step report.
    pub fn step(&mut self, t_next: f64) -> Result<StepReport> {
        let t_now = self.time();
        if !(t_next > t_now) || !t_next.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "step target {t_next} does not advance past {t_now}"
            )));
        }
        let tau = t_next - t_now;
        if matches!(self.history, HistoryState::Fast { .. })
            && tau < self.fast_delta * (1.0 - 1e-9)
        {
            return Err(KitError::Precondition(format!(
                "step {tau:.3e} undercuts the surrogate window lower bound {:.3e}",
                self.fast_delta
            )));
        }
        let n_prev = self.times.len() - 1;
        let alpha = self.params.alpha;
        let a0 = tau.powf(1.0 - alpha) / (gamma(2.0 - alpha) * tau);

        // convolution history of earlier backward differences
        match &mut self.history {
            HistoryState::Direct { fields } => {
                self.work.fill(0.0);
                if n_prev > 0 {
                    let mut nodes = self.times.clone();
                    nodes.push(t_next);
                    let row = l1_weight_row_from_nodes(&nodes, alpha)?;
                    let fields = &*fields;
                    crate::parallel::for_each_chunk_mut(&mut self.work, 1024, |off, chunk| {
                        for k in 0..n_prev {
                            let w = row[n_prev - k];
                            let newer = &fields[k + 1][off..off + chunk.len()];
                            let older = &fields[k][off..off + chunk.len()];
                            for ((acc, a), b) in chunk.iter_mut().zip(newer).zip(older) {
                                *acc += w * (a - b);
                            }
                        }
                    });
                }
            }
            HistoryState::Fast { history } => {
                history.history_term(tau, &mut self.work)?;
            }
        }

        self.evaluate_source(t_next);
        let sigma = a0 + self.params.kappa;
        let cur = self.current.data();
        for i in 0..self.rhs.len() {
            self.rhs[i] = a0 * cur[i] - self.work[i]
                - self.params.reaction_stabilized(cur[i])
                + self.src[i];
        }
        self.solver
            .solve_into(sigma, self.params.eps2, &self.rhs, &mut self.next)?;
        self.solve_count += 1;

        let predictor_sup = match self.kind {
            SchemeKind::StabilizedL1 => None,
            SchemeKind::PredictorCorrector => {
                let sup = self
                    .next
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                self.predictor_sup_max = self.predictor_sup_max.max(sup);
                let cur = self.current.data();
                for i in 0..self.rhs.len() {
                    self.rhs[i] = a0 * cur[i] - self.work[i]
                        - self.params.reaction_stabilized(self.next[i])
                        + self.src[i];
                }
                let mut corrected = std::mem::take(&mut self.next);
                self.solver
                    .solve_into(sigma, self.params.eps2, &self.rhs, &mut corrected)?;
                self.next = corrected;
                self.solve_count += 1;
                Some(sup)
            }
        };

        // discrete fractional derivative of the accepted state:
        // a0 (phi^{n+1} - phi^n) + H^n
        let cur = self.current.data();
        for i in 0..self.rhs.len() {
            self.rhs[i] = a0 * (self.next[i] - cur[i]) + self.work[i];
        }
        let lalpha_sq = inner_product(&self.grid, &self.rhs, &self.rhs);
        self.lalpha_log.push(lalpha_sq);

        match &mut self.history {
            HistoryState::Direct { fields } => fields.push(self.next.clone()),
            HistoryState::Fast { history } => {
                history.update(tau, &self.next, cur)?;
            }
        }
        self.current.data_mut().copy_from_slice(&self.next);
        self.times.push(t_next);

        let sup_norm = self.current.norm_max();
        let violation = sup_norm > 1.0 + MBP_TOLERANCE;
        if violation {
            self.mbp_violations += 1;
        }
        Ok(StepReport {
            step: self.times.len() - 1,
            t: t_next,
            tau,
            sup_norm,
            predictor_sup,
            lalpha_sq,
            mbp_violation: violation,
        })
    }
}
