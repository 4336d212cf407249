//! Cell-centered finite-difference discretisation of [0, L]^d with homogeneous
//! Neumann boundaries, d in {1, 2, 3}. Cell i sits at (i + 1/2) h, h = L/M.
//! Fields are stored x-fastest: index = i + M (j + M k).

pub mod helmholtz;
pub mod transform;

use crate::error::{KitError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    m: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, m: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(KitError::InvalidArgument(format!(
                "spatial dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if m < 2 {
            return Err(KitError::InvalidArgument(format!(
                "need at least two cells per axis, got {m}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(KitError::InvalidArgument(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { dim, m, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.m as f64
    }

    pub fn n_cells(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Cell-center coordinate along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    /// Decompose a flat index into (i, j, k); unused axes report 0.
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.m;
        let j = (idx / self.m) % if self.dim >= 2 { self.m } else { 1 };
        let k = if self.dim == 3 { idx / (self.m * self.m) } else { 0 };
        (i, j, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { data: vec![0.0; grid.n_cells()], grid }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { data: vec![value; grid.n_cells()], grid }
    }

    /// Fill from a function of the cell-center coordinates; unused axes pass 0.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for idx in 0..grid.n_cells() {
            let (i, j, k) = grid.unravel(idx);
            let x = grid.coordinate(i);
            let y = if grid.dim >= 2 { grid.coordinate(j) } else { 0.0 };
            let z = if grid.dim == 3 { grid.coordinate(k) } else { 0.0 };
            data.push(f(x, y, z));
        }
        Self { grid, data }
    }

    pub fn from_data(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() {
            return Err(KitError::GridMismatch(format!(
                "grid has {} cells, data has {}",
                grid.n_cells(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        inner_product(&self.grid, &self.data, &self.data).sqrt()
    }
}

/// Discrete L2 inner product h^d sum u v (sequential, deterministic order).
pub fn inner_product(grid: &GridSpec, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), grid.n_cells());
    debug_assert_eq!(v.len(), grid.n_cells());
    let weight = grid.spacing().powi(grid.dim as i32);
    let mut sum = 0.0;
    for (a, b) in u.iter().zip(v) {
        sum += a * b;
    }
    weight * sum
}

/// Squared H1 seminorm accumulated over interior edges:
/// h^d sum_edges (u_a - u_b)^2 / h^2. Equals <-Laplacian u, u>.
pub fn h1_seminorm_sq(grid: &GridSpec, u: &[f64]) -> f64 {
    let m = grid.m;
    let h = grid.spacing();
    let weight = h.powi(grid.dim as i32) / (h * h);
    let mut sum = 0.0;
    let strides = axis_strides(grid);
    for (axis, &stride) in strides.iter().enumerate() {
        let _ = axis;
        for start in line_starts(grid, stride) {
            for i in 0..m - 1 {
                let a = u[start + i * stride];
                let b = u[start + (i + 1) * stride];
                let d = b - a;
                sum += d * d;
            }
        }
    }
    weight * sum
}

/// Strides of each axis in the flat layout.
pub(crate) fn axis_strides(grid: &GridSpec) -> Vec<usize> {
    (0..grid.dim).map(|a| grid.m.pow(a as u32)).collect()
}

/// Flat start indices of every 1-D line along the axis with the given stride.
pub(crate) fn line_starts(grid: &GridSpec, stride: usize) -> Vec<usize> {
    let m = grid.m;
    let n = grid.n_cells();
    let span = stride * m;
    let mut starts = Vec::with_capacity(n / m);
    for block in (0..n).step_by(span) {
        for offset in 0..stride {
            starts.push(block + offset);
        }
    }
    starts
}

/// Apply the Neumann Laplacian: out = Delta_h u. Boundary cells mirror their
/// interior neighbour, so each matrix row sums to zero.
pub fn laplacian_apply(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(u.len(), grid.n_cells());
    debug_assert_eq!(out.len(), grid.n_cells());
    let m = grid.m;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    out.fill(0.0);
    for &stride in &axis_strides(grid) {
        for start in line_starts(grid, stride) {
            // left boundary: u[-1] mirrors u[0]
            out[start] += inv_h2 * (u[start + stride] - u[start]);
            for i in 1..m - 1 {
                let c = start + i * stride;
                out[c] += inv_h2 * (u[c - stride] - 2.0 * u[c] + u[c + stride]);
            }
            let last = start + (m - 1) * stride;
            out[last] += inv_h2 * (u[last - stride] - u[last]);
        }
    }
}

/// Eigenvalue of the 1-D Neumann Laplacian for mode k: -(4/h^2) sin^2(pi k / (2M)).
pub fn axis_eigenvalue(grid: &GridSpec, k: usize) -> f64 {
    let h = grid.spacing();
    let s = (std::f64::consts::PI * k as f64 / (2.0 * grid.m as f64)).sin();
    -(4.0 / (h * h)) * s * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_field(grid: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..grid.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_data(grid, data).unwrap()
    }

    #[test]
    fn grid_validation_and_geometry() {
        assert!(GridSpec::new(0, 8, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 1, 1.0).is_err());
        assert!(GridSpec::new(2, 8, 0.0).is_err());
        let g = GridSpec::new(2, 8, 2.0).unwrap();
        assert_eq!(g.n_cells(), 64);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.coordinate(0), 0.125);
        assert_eq!(g.unravel(8 + 3), (3, 1, 0));
        let g3 = GridSpec::new(3, 4, 1.0).unwrap();
        assert_eq!(g3.unravel(16 * 2 + 4 * 3 + 1), (1, 3, 2));
    }

    #[test]
    fn laplacian_annihilates_constants_exactly() {
        for dim in 1..=3 {
            let g = GridSpec::new(dim, 6, 1.7).unwrap();
            let u = ScalarField::constant(g, 3.25);
            let mut out = vec![1.0; g.n_cells()];
            laplacian_apply(&g, u.data(), &mut out);
            assert!(out.iter().all(|&v| v == 0.0), "dim {dim}");
        }
    }

    #[test]
    fn laplacian_is_symmetric_and_negative() {
        for dim in 1..=3 {
            let g = GridSpec::new(dim, 5, 2.0).unwrap();
            let u = random_field(g, 10 + dim as u64);
            let v = random_field(g, 20 + dim as u64);
            let mut lu = vec![0.0; g.n_cells()];
            let mut lv = vec![0.0; g.n_cells()];
            laplacian_apply(&g, u.data(), &mut lu);
            laplacian_apply(&g, v.data(), &mut lv);
            let a = inner_product(&g, &lu, v.data());
            let b = inner_product(&g, u.data(), &lv);
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "dim {dim}");
            let quad = inner_product(&g, &lu, u.data());
            assert!(quad <= 1e-12, "dim {dim}: {quad}");
        }
    }

    #[test]
    fn h1_seminorm_matches_laplacian_quadratic_form() {
        for dim in 1..=3 {
            let g = GridSpec::new(dim, 6, 1.3).unwrap();
            let u = random_field(g, 33 + dim as u64);
            let mut lu = vec![0.0; g.n_cells()];
            laplacian_apply(&g, u.data(), &mut lu);
            let a = -inner_product(&g, &lu, u.data());
            let b = h1_seminorm_sq(&g, u.data());
            assert!((a - b).abs() < 1e-12 * b.max(1.0), "dim {dim}: {a} vs {b}");
        }
    }

    #[test]
    fn sampled_cosine_is_an_exact_eigenvector() {
        // cos(pi k (2i+1) / (2M)) diagonalises the 1-D operator
        let g = GridSpec::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        let k = 2usize;
        let lambda = axis_eigenvalue(&g, k);
        let v: Vec<f64> = (0..16)
            .map(|i| {
                (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / 32.0).cos()
            })
            .collect();
        let mut lv = vec![0.0; 16];
        laplacian_apply(&g, &v, &mut lv);
        for i in 0..16 {
            assert!(
                (lv[i] - lambda * v[i]).abs() < 1e-11 * lambda.abs(),
                "i={i}: {} vs {}",
                lv[i],
                lambda * v[i]
            );
        }
        // on the domain [0, 2 pi], mode k=2 is the sampled cos(x)
        for i in 0..16 {
            let x = g.coordinate(i);
            assert!((v[i] - x.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn tensor_cosine_eigenvector_in_3d() {
        let g = GridSpec::new(3, 8, 2.0 * std::f64::consts::PI).unwrap();
        let (kx, ky, kz) = (2usize, 1usize, 3usize);
        let lambda = axis_eigenvalue(&g, kx) + axis_eigenvalue(&g, ky) + axis_eigenvalue(&g, kz);
        let mode = |k: usize, i: usize| {
            (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / 16.0).cos()
        };
        let u = {
            let mut data = vec![0.0; g.n_cells()];
            for idx in 0..g.n_cells() {
                let (i, j, l) = g.unravel(idx);
                data[idx] = mode(kx, i) * mode(ky, j) * mode(kz, l);
            }
            ScalarField::from_data(g, data).unwrap()
        };
        let mut lu = vec![0.0; g.n_cells()];
        laplacian_apply(&g, u.data(), &mut lu);
        for idx in 0..g.n_cells() {
            assert!(
                (lu[idx] - lambda * u.data()[idx]).abs() < 1e-10 * lambda.abs(),
                "idx {idx}"
            );
        }
    }

    #[test]
    fn inner_product_carries_the_cell_volume() {
        let g = GridSpec::new(2, 4, 2.0).unwrap();
        let u = ScalarField::constant(g, 1.0);
        // h^2 * M^2 = L^2 = 4
        assert!((inner_product(&g, u.data(), u.data()) - 4.0).abs() < 1e-14);
        assert!((u.norm_l2() - 2.0).abs() < 1e-14);
        assert_eq!(ScalarField::constant(g, -3.0).norm_max(), 3.0);
    }

    #[test]
    fn from_fn_uses_cell_centers() {
        let g = GridSpec::new(2, 4, 4.0);
        let g = g.unwrap();
        let f = ScalarField::from_fn(g, |x, y, _| x + 10.0 * y);
        // cell (0,0) at (0.5, 0.5), cell (3,2) at (3.5, 2.5)
        assert_eq!(f.data()[0], 0.5 + 5.0);
        assert_eq!(f.data()[2 * 4 + 3], 3.5 + 25.0);
    }

    #[test]
    fn line_iteration_covers_every_cell_once() {
        for dim in 1..=3 {
            let g = GridSpec::new(dim, 4, 1.0).unwrap();
            for &stride in &axis_strides(&g) {
                let mut seen = vec![0usize; g.n_cells()];
                for start in line_starts(&g, stride) {
                    for i in 0..g.m() {
                        seen[start + i * stride] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1), "dim {dim} stride {stride}");
            }
        }
    }
}
