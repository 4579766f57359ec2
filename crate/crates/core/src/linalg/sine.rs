//! Orthonormal type-I sine transform and the fast diagonal solver for
//! `(-Δ_h + s) x = b` with constant complex `s`.

use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::C64;

pub struct FastDirichlet {
    n: usize,
    dim: usize,
    strides: [usize; 3],
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    /// Per-axis eigenvalues of the 1D Dirichlet difference Laplacian.
    axis_eigenvalues: Vec<f64>,
}

impl FastDirichlet {
    pub fn new(n: usize, dim: usize, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (n + 1));
        let mut strides = [0usize; 3];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= n;
        }
        let axis_eigenvalues = (1..=n)
            .map(|j| 4.0 / (h * h) * (PI * j as f64 / (2.0 * (n as f64 + 1.0))).sin().powi(2))
            .collect();
        FastDirichlet {
            n,
            dim,
            strides,
            len: s,
            fft,
            axis_eigenvalues,
        }
    }

    pub fn axis_eigenvalues(&self) -> &[f64] {
        &self.axis_eigenvalues
    }

    /// Smallest eigenvalue of `-Δ_h`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.dim as f64 * self.axis_eigenvalues[0]
    }

    /// Orthonormal sine transform along every axis; it is its own inverse.
    pub fn transform(&self, x: &mut [C64]) {
        assert_eq!(x.len(), self.len);
        let n = self.n;
        let m = 2 * (n + 1);
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let mut scratch = vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let scale = C64::new(0.0, 0.5 * (2.0 / (n as f64 + 1.0)).sqrt());
        for a in 0..self.dim {
            let s = self.strides[a];
            let block = n * s;
            for base in (0..self.len).step_by(block) {
                for t in 0..s {
                    let start = base + t;
                    buf[0] = C64::new(0.0, 0.0);
                    buf[n + 1] = C64::new(0.0, 0.0);
                    for j in 0..n {
                        let v = x[start + j * s];
                        buf[j + 1] = v;
                        buf[m - 1 - j] = -v;
                    }
                    self.fft.process_with_scratch(&mut buf, &mut scratch);
                    for j in 0..n {
                        x[start + j * s] = buf[j + 1] * scale;
                    }
                }
            }
        }
    }

    /// Solves `(-Δ_h + shift) x = b` in place.
    pub fn solve(&self, x: &mut [C64], shift: C64) {
        self.transform(x);
        self.scale_by_symbol(x, |lam| 1.0 / (lam + shift));
        self.transform(x);
    }

    /// Multiplies the transformed coefficients by `g(eigenvalue)`.
    pub fn scale_by_symbol<F: Fn(f64) -> C64>(&self, x: &mut [C64], g: F) {
        let ev = &self.axis_eigenvalues;
        let n = self.n;
        if self.dim == 2 {
            for i in 0..n {
                for j in 0..n {
                    x[i * n + j] *= g(ev[i] + ev[j]);
                }
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    let eij = ev[i] + ev[j];
                    let row = (i * n + j) * n;
                    for k in 0..n {
                        x[row + k] *= g(eij + ev[k]);
                    }
                }
            }
        }
    }
}
