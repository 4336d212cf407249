//! Temporal meshes on [0, T]: uniform, graded t_n = T (n/N)^gamma, composite
//! (graded start, uniform tail) and an adaptive step-size controller driven by
//! the energy dissipation rate.

use crate::error::{KitError, Result};

/// Nonuniform partition 0 = t_0 < t_1 < ... < t_N = T.
///
/// Steps are computed once at construction and stored, so `step(n)` is always
/// bit-identical to `nodes[n] - nodes[n-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    nodes: Vec<f64>,
    steps: Vec<f64>,
    horizon: f64,
}

impl TemporalMesh {
    /// Uniform mesh with N steps of size T/N.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "mesh horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(KitError::InvalidArgument("mesh needs at least one step".into()));
        }
        let nn = n_steps as f64;
        let nodes: Vec<f64> = (0..=n_steps).map(|n| (n as f64 / nn) * horizon).collect();
        Self::from_nodes(nodes)
    }

    /// Graded mesh t_n = T (n/N)^gamma concentrating steps near t = 0.
    ///
    /// Requires gamma >= 1; gamma = 1 reproduces `uniform` bit-for-bit.
    pub fn graded(horizon: f64, n_steps: usize, gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "grading exponent must satisfy gamma >= 1, got {gamma}"
            )));
        }
        if gamma == 1.0 {
            return Self::uniform(horizon, n_steps);
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "mesh horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(KitError::InvalidArgument("mesh needs at least one step".into()));
        }
        let nn = n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps)
            .map(|n| (n as f64 / nn).powf(gamma) * horizon)
            .collect();
        // (N/N)^gamma may round below 1; the right endpoint is T by definition.
        nodes[n_steps] = horizon;
        Self::from_nodes(nodes)
    }

    /// Graded mesh with `n_graded` steps on [0, t_switch], then a uniform tail
    /// with step size as close to `tau_tail` as divides (T - t_switch) evenly.
    /// The node t_switch is shared exactly between the two phases.
    pub fn composite(
        horizon: f64,
        n_graded: usize,
        gamma: f64,
        t_switch: f64,
        tau_tail: f64,
    ) -> Result<Self> {
        if !(t_switch > 0.0 && t_switch < horizon) {
            return Err(KitError::InvalidArgument(format!(
                "composite switch time must lie in (0, T), got {t_switch} with T = {horizon}"
            )));
        }
        if !(tau_tail > 0.0) || !tau_tail.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "composite tail step must be positive, got {tau_tail}"
            )));
        }
        let head = Self::graded(t_switch, n_graded, gamma)?;
        let span = horizon - t_switch;
        let n_tail = ((span / tau_tail).round().max(1.0)) as usize;
        let mut nodes = head.nodes;
        for m in 1..=n_tail {
            nodes.push(t_switch + (m as f64 / n_tail as f64) * span);
        }
        nodes[n_graded + n_tail] = horizon;
        Self::from_nodes(nodes)
    }

    /// Wrap an explicit node vector. Validates t_0 = 0 and strict monotonicity.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(KitError::InvalidArgument("mesh needs at least the node t_0 = 0".into()));
        }
        if nodes[0] != 0.0 {
            return Err(KitError::InvalidArgument(format!(
                "mesh must start at t_0 = 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(KitError::InvalidArgument(format!(
                    "mesh nodes must be finite and strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        let horizon = *nodes.last().unwrap();
        Ok(Self { nodes, steps, horizon })
    }

    /// Number of steps N.
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Final time T = t_N.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// All nodes t_0..t_N.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node t_n, 0 <= n <= N.
    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// Step tau_n = t_n - t_{n-1}, 1 <= n <= N.
    pub fn step(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    /// All steps tau_1..tau_N.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Smallest step of the mesh.
    pub fn min_step(&self) -> f64 {
        self.steps.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest step of the mesh.
    pub fn max_step(&self) -> f64 {
        self.steps.iter().cloned().fold(0.0, f64::max)
    }

    /// max_k tau_k / tau_{k+1}; diagnostic for backward step-ratio growth.
    /// Needs at least two steps.
    pub fn max_step_ratio(&self) -> Result<f64> {
        if self.steps.len() < 2 {
            return Err(KitError::InvalidArgument(
                "step ratio needs a mesh with at least two steps".into(),
            ));
        }
        Ok(self
            .steps
            .windows(2)
            .map(|w| w[0] / w[1])
            .fold(0.0, f64::max))
    }
}

/// Step-size controller tau = max(tau_min, tau_max / sqrt(1 + adp_gain * rate^2))
/// where `rate` is a backward-difference estimate of the energy decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveController {
    pub tau_min: f64,
    pub tau_max: f64,
    pub adp_gain: f64,
}

impl AdaptiveController {
    pub fn new(tau_min: f64, tau_max: f64, adp_gain: f64) -> Result<Self> {
        if !(tau_min > 0.0) || !(tau_max >= tau_min) || !(adp_gain >= 0.0) {
            return Err(KitError::InvalidArgument(format!(
                "adaptive controller needs 0 < tau_min <= tau_max and adp_gain >= 0, \
                 got tau_min = {tau_min}, tau_max = {tau_max}, adp_gain = {adp_gain}"
            )));
        }
        Ok(Self { tau_min, tau_max, adp_gain })
    }

    /// Proposed next step for the given energy rate estimate.
    pub fn next_step(&self, energy_rate: f64) -> Result<f64> {
        if !energy_rate.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "energy rate must be finite, got {energy_rate}"
            )));
        }
        let tau = self.tau_max / (1.0 + self.adp_gain * energy_rate * energy_rate).sqrt();
        Ok(tau.max(self.tau_min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_nodes_and_steps() {
        let mesh = TemporalMesh::uniform(2.0, 4).unwrap();
        assert_eq!(mesh.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(mesh.n_steps(), 4);
        assert_eq!(mesh.horizon(), 2.0);
        assert_eq!(mesh.step(1), 0.5);
        assert_eq!(mesh.step(4), 0.5);
    }

    #[test]
    fn uniform_rejects_bad_arguments() {
        assert!(TemporalMesh::uniform(0.0, 4).is_err());
        assert!(TemporalMesh::uniform(-1.0, 4).is_err());
        assert!(TemporalMesh::uniform(1.0, 0).is_err());
        assert!(TemporalMesh::uniform(f64::NAN, 4).is_err());
    }

    #[test]
    fn graded_quartic_nodes() {
        let mesh = TemporalMesh::graded(1.0, 4, 2.0).unwrap();
        let expect = [0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0];
        for (a, b) in mesh.nodes().iter().zip(expect.iter()) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn graded_gamma_one_is_uniform_bitwise() {
        let a = TemporalMesh::graded(3.7, 17, 1.0).unwrap();
        let b = TemporalMesh::uniform(3.7, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn graded_rejects_gamma_below_one() {
        assert!(TemporalMesh::graded(1.0, 4, 0.99).is_err());
        assert!(TemporalMesh::graded(1.0, 4, f64::NAN).is_err());
    }

    #[test]
    fn composite_shares_switch_node_exactly() {
        let mesh = TemporalMesh::composite(1.0, 8, 3.0, 0.1, 0.05).unwrap();
        assert_eq!(mesh.node(8), 0.1);
        assert_eq!(mesh.horizon(), 1.0);
        // tail steps uniform
        let tail = &mesh.steps()[8..];
        assert_eq!(tail.len(), 18);
        for w in tail.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn step_ratio_example() {
        let mesh = TemporalMesh::from_nodes(vec![0.0, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(mesh.max_step_ratio().unwrap(), 2.0);
        let single = TemporalMesh::uniform(1.0, 1).unwrap();
        assert!(single.max_step_ratio().is_err());
    }

    #[test]
    fn from_nodes_validates() {
        assert!(TemporalMesh::from_nodes(vec![]).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.1, 0.5]).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.0, 0.5, 0.2]).is_err());
        // single node [0.0] is the trivial zero-step mesh
        let trivial = TemporalMesh::from_nodes(vec![0.0]).unwrap();
        assert_eq!(trivial.n_steps(), 0);
    }

    #[test]
    fn adaptive_controller_example() {
        let ctrl = AdaptiveController::new(1e-5, 0.1, 1e5).unwrap();
        let tau = ctrl.next_step(1.0).unwrap();
        assert!((tau - 3.1622e-4).abs() < 1e-7, "tau = {tau}");
        assert_eq!(ctrl.next_step(0.0).unwrap(), 0.1);
        // huge rate clamps at tau_min
        assert_eq!(ctrl.next_step(1e12).unwrap(), 1e-5);
        assert!(ctrl.next_step(f64::NAN).is_err());
        assert!(AdaptiveController::new(0.0, 0.1, 1.0).is_err());
        assert!(AdaptiveController::new(1e-3, 1e-4, 1.0).is_err());
    }

    /// tau_k <= C tau min(1, t_k^{1 - 1/gamma}) with C independent of N.
    #[test]
    fn graded_local_step_bound_uniform_in_n() {
        for gamma in [2.0, 3.5] {
            let mut worst: f64 = 0.0;
            for n in [10usize, 50, 100, 500, 1000] {
                let mesh = TemporalMesh::graded(1.0, n, gamma).unwrap();
                let tau = mesh.max_step();
                for k in 1..=n {
                    let bound = tau * mesh.node(k).powf(1.0 - 1.0 / gamma).min(1.0);
                    worst = worst.max(mesh.step(k) / bound);
                }
            }
            assert!(worst < 2.0, "gamma = {gamma}: C = {worst}");
        }
    }

    proptest! {
        #[test]
        fn steps_sum_to_horizon(n in 1usize..200, gamma in 1.0f64..4.0, t in 0.1f64..100.0) {
            let mesh = TemporalMesh::graded(t, n, gamma).unwrap();
            let sum: f64 = mesh.steps().iter().sum();
            let tol = 8.0 * f64::EPSILON * (n as f64) * t;
            prop_assert!((sum - t).abs() <= tol, "sum {} vs T {}", sum, t);
        }

        #[test]
        fn steps_match_node_differences_exactly(n in 1usize..100, gamma in 1.0f64..4.0) {
            let mesh = TemporalMesh::graded(1.0, n, gamma).unwrap();
            for k in 1..=n {
                prop_assert_eq!(mesh.step(k), mesh.node(k) - mesh.node(k - 1));
            }
        }

        #[test]
        fn stronger_grading_shrinks_first_step(n in 2usize..100, gamma in 1.0f64..4.0) {
            let mesh_a = TemporalMesh::graded(1.0, n, gamma).unwrap();
            let mesh_b = TemporalMesh::graded(1.0, n, gamma + 0.5).unwrap();
            prop_assert!(mesh_b.node(1) < mesh_a.node(1));
        }

        #[test]
        fn adaptive_step_always_in_band(rate in -1e6f64..1e6) {
            let ctrl = AdaptiveController::new(1e-5, 0.1, 1e5).unwrap();
            let tau = ctrl.next_step(rate).unwrap();
            prop_assert!(tau >= 1e-5 && tau <= 0.1);
        }
    }
}
