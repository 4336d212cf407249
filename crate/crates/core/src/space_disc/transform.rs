//! Unnormalised DCT-II and its inverse (scaled DCT-III) along grid lines,
//! realised with length-2M complex FFTs. The pair satisfies
//! dct3(dct2(x)) == x, which is all the spectral solver needs.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct DctPlan {
    m: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    // e^{-i pi k / (2M)} and its conjugate
    twiddle: Vec<Complex64>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl DctPlan {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2);
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(2 * m);
        let fft_inv = planner.plan_fft_inverse(2 * m);
        let twiddle = (0..m)
            .map(|k| {
                let phi = std::f64::consts::PI * k as f64 / (2.0 * m as f64);
                Complex64::new(phi.cos(), -phi.sin())
            })
            .collect();
        let scratch_len = fft_fwd
            .get_inplace_scratch_len()
            .max(fft_inv.get_inplace_scratch_len());
        Self {
            m,
            fft_fwd,
            fft_inv,
            twiddle,
            buffer: vec![Complex64::default(); 2 * m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    /// In-place DCT-II: x_k <- sum_i x_i cos(pi k (2i+1) / (2M)).
    /// The strided view lets callers transform lines of a flat field directly.
    pub fn dct2_strided(&mut self, data: &mut [f64], start: usize, stride: usize) {
        let m = self.m;
        for i in 0..m {
            let v = data[start + i * stride];
            self.buffer[i] = Complex64::new(v, 0.0);
            self.buffer[2 * m - 1 - i] = Complex64::new(v, 0.0);
        }
        self.fft_fwd
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for k in 0..m {
            data[start + k * stride] = 0.5 * (self.twiddle[k] * self.buffer[k]).re;
        }
    }

    /// In-place inverse of `dct2_strided` (DCT-III with 2/M normalisation).
    pub fn dct3_strided(&mut self, data: &mut [f64], start: usize, stride: usize) {
        let m = self.m;
        self.buffer.fill(Complex64::default());
        self.buffer[0] = Complex64::new(0.5 * data[start], 0.0);
        for k in 1..m {
            // conjugate twiddle gives e^{+i pi k/(2M)}
            self.buffer[k] = self.twiddle[k].conj() * data[start + k * stride];
        }
        self.fft_inv
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 2.0 / m as f64;
        for i in 0..m {
            data[start + i * stride] = scale * self.buffer[i].re;
        }
    }
}
