//! Manufactured solution phi(x, t) = 0.2 (t^mu + 1) cos(x) cos(y) [cos(z)]
//! on [0, 2 pi]^d with the forcing term that makes it solve the model
//! exactly. The exponent mu sets the initial-time regularity (the first time
//! derivative behaves like t^{mu-1}), which is what graded meshes resolve.

use crate::error::{KitError, Result};
use crate::schemes::{ModelParams, SourceFn};
use crate::space_disc::{GridSpec, ScalarField};
use statrs::function::gamma::gamma;

pub const MANUFACTURED_AMPLITUDE: f64 = 0.2;

#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub mu: f64,
}

impl ManufacturedCase {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "regularity exponent must be positive, got {mu}"
            )));
        }
        Ok(Self { mu })
    }

    /// cos(x) cos(y) cos(z) restricted to the active axes.
    pub fn cosine(&self, dim: usize, x: f64, y: f64, z: f64) -> f64 {
        let mut c = x.cos();
        if dim >= 2 {
            c *= y.cos();
        }
        if dim == 3 {
            c *= z.cos();
        }
        c
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        MANUFACTURED_AMPLITUDE * (t.powf(self.mu) + 1.0)
    }

    /// Caputo derivative of the time factor:
    /// 0.2 Gamma(mu+1)/Gamma(mu+1-alpha) t^{mu-alpha} (constants drop out).
    pub fn caputo_time_factor(&self, alpha: f64, t: f64) -> f64 {
        MANUFACTURED_AMPLITUDE * gamma(self.mu + 1.0) / gamma(self.mu + 1.0 - alpha)
            * t.powf(self.mu - alpha)
    }

    pub fn exact(&self, dim: usize, t: f64, x: f64, y: f64, z: f64) -> f64 {
        self.time_factor(t) * self.cosine(dim, x, y, z)
    }

    pub fn exact_field(&self, grid: GridSpec, t: f64) -> ScalarField {
        let dim = grid.dim();
        ScalarField::from_fn(grid, |x, y, z| self.exact(dim, t, x, y, z))
    }

    pub fn initial_field(&self, grid: GridSpec) -> ScalarField {
        self.exact_field(grid, 0.0)
    }

    /// Forcing that the model equation needs for `exact` to solve it:
    /// s = caputo(phi) - eps2 Laplacian(phi) + f(phi); each axis of the
    /// unit-wavenumber cosine contributes +eps2 phi to the middle term.
    pub fn source(&self, params: ModelParams, dim: usize) -> SourceFn {
        let case = *self;
        Box::new(move |t, x, y, z| {
            let c = case.cosine(dim, x, y, z);
            let phi = case.time_factor(t) * c;
            case.caputo_time_factor(params.alpha, t) * c
                + dim as f64 * params.eps2 * phi
                + (phi * phi * phi - phi)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn caputo_factor_matches_the_quadrature_oracle() {
        // mu = 1, alpha = 0.5, t = 1: Gamma(2)/Gamma(1.5) = 1.1283791671
        let case = ManufacturedCase::new(1.0).unwrap();
        let got = case.caputo_time_factor(0.5, 1.0) / MANUFACTURED_AMPLITUDE;
        assert!((got - 1.1283791671).abs() < 1e-9, "{got}");
        for (mu, alpha, t) in [(0.5, 0.3, 0.7), (0.5, 0.8, 1.0), (1.5, 0.4, 0.25)] {
            let case = ManufacturedCase::new(mu).unwrap();
            let want = MANUFACTURED_AMPLITUDE * oracle::caputo_power_quadrature(mu, alpha, t);
            let got = case.caputo_time_factor(alpha, t);
            assert!(
                (got - want).abs() < 1e-10 * want.abs().max(1.0),
                "mu={mu} alpha={alpha} t={t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn fractional_term_vanishes_at_zero_when_regular_enough() {
        let case = ManufacturedCase::new(0.5).unwrap();
        assert_eq!(case.caputo_time_factor(0.3, 0.0), 0.0);
    }

    #[test]
    fn rejects_nonpositive_exponent() {
        assert!(ManufacturedCase::new(0.0).is_err());
        assert!(ManufacturedCase::new(-1.0).is_err());
    }

    #[test]
    fn source_closes_the_pde_residual() {
        // independent certification: Caputo by quadrature, Laplacian in
        // closed form, so any error in `source` shows up here
        let params = ModelParams::new(1e-4, 0.3, 2.0).unwrap();
        for dim in 1..=3 {
            for mu in [0.5, 1.0] {
                let case = ManufacturedCase::new(mu).unwrap();
                let source = case.source(params, dim);
                for t in [0.3, 1.0] {
                    for (x, y, z) in [(0.3, 1.1, 2.0), (2.9, 0.2, 4.4), (5.5, 3.3, 0.9)] {
                        let c = case.cosine(dim, x, y, z);
                        let phi = case.exact(dim, t, x, y, z);
                        let caputo =
                            MANUFACTURED_AMPLITUDE * oracle::caputo_power_quadrature(mu, params.alpha, t) * c;
                        let laplacian = -(dim as f64) * phi;
                        let residual = caputo - params.eps2 * laplacian
                            + (phi * phi * phi - phi)
                            - source(t, x, y, z);
                        assert!(
                            residual.abs() < 1e-10,
                            "dim={dim} mu={mu} t={t} x={x}: residual {residual}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn initial_field_respects_the_bound_and_grid_centers() {
        let grid = GridSpec::new(2, 16, 2.0 * std::f64::consts::PI).unwrap();
        let case = ManufacturedCase::new(0.5).unwrap();
        let init = case.initial_field(grid);
        assert!(init.norm_max() <= MANUFACTURED_AMPLITUDE + 1e-15);
        let x0 = grid.coordinate(0);
        assert_eq!(init.data()[0], 0.2 * x0.cos() * x0.cos());
    }
}
