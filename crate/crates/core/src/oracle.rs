//! Independent reference computations used by the test suite: tanh-sinh
//! quadrature for the defining integrals of kernel weights and fractional
//! derivatives, and dense linear-algebra reconstructions of the orthogonal
//! complementary kernels. Nothing here shares code with the production paths
//! it cross-checks.

use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

/// Tanh-sinh quadrature of f over [a, b], tolerant of integrable endpoint
/// singularities. The integrand receives (x, x - a, b - x) with the endpoint
/// distances computed without cancellation, so f can evaluate terms like
/// (b - x)^(-alpha) accurately arbitrarily close to the endpoints.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let center = 0.5 * (a + b);
    let radius = 0.5 * (b - a);
    // One abscissa pair at offset t: x = center +/- radius*tanh(w), w = pi/2 sinh t.
    // distance to the near endpoint: radius*(1 - tanh w) = 2*radius/(1 + e^{2w}).
    let sample = |t: f64| -> f64 {
        let w = 0.5 * std::f64::consts::PI * t.sinh();
        let sech2 = {
            let c = w.cosh();
            1.0 / (c * c)
        };
        let weight = 0.5 * std::f64::consts::PI * t.cosh() * sech2;
        if weight < 1e-320 {
            return 0.0;
        }
        let near = 2.0 * radius / (1.0 + (2.0 * w).exp());
        let far = 2.0 * radius - near;
        let x_hi = center + radius * w.tanh();
        let x_lo = center - radius * w.tanh();
        let mut acc = 0.0;
        // right abscissa: b - x = near, x - a = far
        let hi = f(x_hi, far, near) * weight;
        if hi.is_finite() {
            acc += hi;
        }
        if t > 0.0 {
            let lo = f(x_lo, near, far) * weight;
            if lo.is_finite() {
                acc += lo;
            }
        }
        acc
    };

    let t_max = 6.5;
    let mut h = 0.5;
    let mut total = sample(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        total += sample(k as f64 * h);
        k += 1;
    }
    let mut estimate = total * h * radius;
    for _ in 0..10 {
        // refine: add samples at odd multiples of h/2
        let h2 = 0.5 * h;
        let mut extra = 0.0;
        let mut k = 1;
        while (k as f64) * h2 <= t_max {
            extra += sample(k as f64 * h2);
            k += 2;
        }
        total += extra;
        let refined = total * h2 * radius;
        let done = (refined - estimate).abs() <= rel_tol * refined.abs().max(1e-300);
        estimate = refined;
        h = h2;
        if done {
            break;
        }
    }
    estimate
}

/// Convolution weight for the interval [t_k, t_{k+1}] seen from t_{n+1},
/// straight from the defining integral
/// (1/(Gamma(1-alpha) tau_{k+1})) \int_{t_k}^{t_{k+1}} (t_{n+1}-s)^{-alpha} ds.
pub fn l1_weight_quadrature(nodes: &[f64], n: usize, k: usize, alpha: f64) -> f64 {
    let t_next = nodes[n + 1];
    let tau = nodes[k + 1] - nodes[k];
    let integral = tanh_sinh(
        |_s, _dl, dr| {
            // t_{n+1} - s = (t_{n+1} - t_{k+1}) + (t_{k+1} - s); the second term
            // is the stable right-endpoint distance.
            let arg = (t_next - nodes[k + 1]) + dr;
            arg.powf(-alpha)
        },
        nodes[k],
        nodes[k + 1],
        1e-14,
    );
    integral / (gamma(1.0 - alpha) * tau)
}

/// Caputo derivative of t^mu at time t via quadrature of
/// (1/Gamma(1-alpha)) \int_0^t (t-s)^{-alpha} mu s^{mu-1} ds.
pub fn caputo_power_quadrature(mu: f64, alpha: f64, t: f64) -> f64 {
    let integral = tanh_sinh(
        |_s, dl, dr| mu * dl.powf(mu - 1.0) * dr.powf(-alpha),
        0.0,
        t,
        1e-14,
    );
    integral / gamma(1.0 - alpha)
}

/// Lower-triangular matrix of convolution weights: entry (i, k) = row_i[i - k].
pub fn dense_weight_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, k| if k <= i { rows[i][i - k] } else { 0.0 })
}

/// Rows of the inverse of the weight matrix, computed densely. Row n is the
/// n-th orthogonal complementary kernel row laid out by distance.
pub fn dense_inverse_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let a = dense_weight_matrix(rows);
    let inv = a.try_inverse().expect("weight matrix is triangular with positive diagonal");
    (0..rows.len())
        .map(|i| (0..=i).rev().map(|k| inv[(i, k)]).collect())
        .collect()
}

/// Dense symmetric eigendecomposition of a small matrix, returning
/// (eigenvalues ascending, eigenvectors as columns).
pub fn dense_symmetric_eigen(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = eig.eigenvectors.nrows();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}
