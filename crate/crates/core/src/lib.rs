//! Boundary spectral data of Schrödinger operators on a box, complex-frequency
//! plane-wave probes, and Fourier recovery of the difference of two potentials.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod potential;
pub mod probe;
pub mod reconstruct;
pub mod scattering;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use forward::{Bsd, DiscreteOperator, EigenPairs, EigenSolverOptions, TraceStencil};
pub use geometry::{make_grid, BoundaryMesh, BoundaryNode, Grid, GridSpec, Point};
pub use potential::{AdmissibilityReport, PotentialField, PotentialSpec, TrigBasis, TrigTerm};
pub use probe::{IsozakiProbe, Sign};
pub use reconstruct::{
    FourierSample, FourierSamples, FrequencyLattice, InversionResult, SampleMethod, TauPolicy,
};
pub use scattering::{ScatteringSolution, SolverOptions};

/// Real or complex grid values.
pub trait Scalar: Copy + Send + Sync {
    fn to_c64(self) -> C64;
    fn modulus_sqr(self) -> f64;
    fn modulus(self) -> f64 {
        self.modulus_sqr().sqrt()
    }
}

impl Scalar for f64 {
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn modulus_sqr(self) -> f64 {
        self * self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for C64 {
    fn to_c64(self) -> C64 {
        self
    }
    fn modulus_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}
