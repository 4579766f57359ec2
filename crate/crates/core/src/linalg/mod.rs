//! Grid linear algebra: stencil application, sine-transform fast solver,
//! Krylov and banded solvers, and symmetric eigensolvers.

pub mod banded;
pub mod eigen;
pub mod krylov;
pub mod sine;
pub mod stencil;

pub use banded::BandedLu;
pub use eigen::{dense_eigen, iterative_eigen, IterativeEigenOptions};
pub use krylov::{gmres, pcg, KrylovOptions, KrylovReport};
pub use sine::FastDirichlet;
pub use stencil::neg_laplacian;

use crate::C64;

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
