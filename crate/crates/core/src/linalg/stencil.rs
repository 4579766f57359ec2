use std::ops::{Mul, SubAssign};

/// `y = -Δ_h x` with homogeneous Dirichlet data outside the grid.
pub fn neg_laplacian<T>(n: usize, dim: usize, strides: [usize; 3], h: f64, x: &[T], y: &mut [T])
where
    T: Copy + SubAssign + Mul<f64, Output = T>,
{
    let inv_h2 = 1.0 / (h * h);
    let diag = 2.0 * dim as f64 * inv_h2;
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = xi * diag;
    }
    let len = x.len();
    for &s in strides.iter().take(dim) {
        let block = n * s;
        for base in (0..len).step_by(block) {
            for j in 0..n {
                let row = base + j * s;
                if j > 0 {
                    for t in row..row + s {
                        y[t] -= x[t - s] * inv_h2;
                    }
                }
                if j + 1 < n {
                    for t in row..row + s {
                        y[t] -= x[t + s] * inv_h2;
                    }
                }
            }
        }
    }
}
