//! Discrete Dirichlet Schrödinger operator, its eigenpairs, Neumann traces,
//! and boundary spectral data.

use faer::Mat;
use serde::{Deserialize, Serialize};
use std::ops::{Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::geometry::{Grid, GridSpec};
use crate::linalg::{
    dense_eigen, iterative_eigen, neg_laplacian, pcg, FastDirichlet, IterativeEigenOptions, KrylovOptions,
};
use crate::potential::{self, PotentialField, PotentialSpec};
use crate::C64;

/// One-sided difference used for the outward normal derivative of a field
/// vanishing on the boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStencil {
    /// `-u_1 / h`: the flux that makes the discrete Green identity exact.
    #[default]
    TwoPoint,
    /// `-(4 u_1 - u_2) / (2h)`.
    ThreePoint,
    /// Two-point flux with the wrong orientation; only for exercising the checks.
    InwardTwoPoint,
}

/// Outward normal derivative at the boundary nodes of a grid field with zero
/// Dirichlet data.
pub fn neumann_trace<T>(grid: &Grid, u: &[T], stencil: TraceStencil) -> Vec<T>
where
    T: Copy + Mul<f64, Output = T> + Sub<Output = T> + Neg<Output = T>,
{
    let h = grid.h();
    grid.boundary()
        .nodes
        .iter()
        .map(|b| {
            let u1 = u[b.inward[0]];
            match stencil {
                TraceStencil::TwoPoint => -(u1 * (1.0 / h)),
                TraceStencil::InwardTwoPoint => u1 * (1.0 / h),
                TraceStencil::ThreePoint => {
                    let u2 = u[b.inward[1]];
                    -((u1 * 4.0 - u2) * (0.5 / h))
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: Grid,
    potential: PotentialField,
    spec: Option<PotentialSpec>,
}

impl DiscreteOperator {
    pub fn assemble(grid: &Grid, potential: PotentialField) -> Result<Self> {
        if potential.values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: potential.values.len(),
            });
        }
        Ok(DiscreteOperator {
            grid: grid.clone(),
            potential,
            spec: None,
        })
    }

    pub fn from_spec(grid: &Grid, spec: &PotentialSpec) -> Result<Self> {
        let field = potential::sample(spec, grid)?;
        let mut op = Self::assemble(grid, field)?;
        op.spec = Some(spec.clone());
        Ok(op)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn spec(&self) -> Option<&PotentialSpec> {
        self.spec.as_ref()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `y = (-Δ_h + q) x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.grid;
        neg_laplacian(g.n(), g.dim(), g.strides(), g.h(), x, y);
        for ((yi, xi), qi) in y.iter_mut().zip(x).zip(&self.potential.values) {
            *yi += qi * xi;
        }
    }

    /// `y = (-Δ_h + q - z) x`.
    pub fn apply_shifted(&self, x: &[C64], y: &mut [C64], z: C64) {
        let g = &self.grid;
        neg_laplacian(g.n(), g.dim(), g.strides(), g.h(), x, y);
        for ((yi, xi), qi) in y.iter_mut().zip(x).zip(&self.potential.values) {
            *yi += (qi - z) * xi;
        }
    }

    pub fn dense(&self) -> Mat<f64> {
        let g = &self.grid;
        let len = g.len();
        let inv_h2 = 1.0 / (g.h() * g.h());
        let mut a = Mat::<f64>::zeros(len, len);
        for k in 0..len {
            a[(k, k)] = 2.0 * g.dim() as f64 * inv_h2 + self.potential.values[k];
            let idx = g.multi_index(k);
            for axis in 0..g.dim() {
                let s = g.strides()[axis];
                if idx[axis] + 1 < g.n() {
                    a[(k, k + s)] = -inv_h2;
                    a[(k + s, k)] = -inv_h2;
                }
            }
        }
        a
    }

    /// Lower and upper bounds on the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let g = &self.grid;
        let fd_min = g.dim() as f64 * 4.0 / (g.h() * g.h())
            * (std::f64::consts::PI / (2.0 * (g.n() as f64 + 1.0))).sin().powi(2);
        let fd_max = 4.0 * g.dim() as f64 / (g.h() * g.h());
        (fd_min + self.potential.min, fd_max + self.potential.max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenSolverOptions {
    /// Grids with at most this many unknowns use the dense solver.
    pub dense_limit: usize,
    pub iterative: IterativeEigenOptions,
    pub inner_tol: f64,
    pub stencil: TraceStencil,
}

impl Default for EigenSolverOptions {
    fn default() -> Self {
        EigenSolverOptions {
            dense_limit: 6000,
            iterative: IterativeEigenOptions::default(),
            inner_tol: 1e-12,
            stencil: TraceStencil::TwoPoint,
        }
    }
}

/// Eigenpairs normalized in the grid inner product, ascending, with the sign
/// of each vector fixed by its boundary trace.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub traces: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lowest `k` eigenpairs of the operator.
pub fn eigs(op: &DiscreteOperator, k: usize, opts: &EigenSolverOptions) -> Result<EigenPairs> {
    let len = op.len();
    if k > len {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: len,
        });
    }
    let raw = if len <= opts.dense_limit {
        dense_eigen(&op.dense(), k)?
    } else {
        let g = op.grid();
        let fd = FastDirichlet::new(g.n(), g.dim(), g.h());
        let (lo, _) = op.spectrum_bounds();
        let sigma = lo - 1.0f64.max(0.01 * lo.abs());
        let pre_shift = C64::new(op.potential().mean() - sigma, 0.0);
        let z = C64::new(sigma, 0.0);
        let inner = KrylovOptions {
            tol: opts.inner_tol,
            restart: 0,
            max_iter: 20000,
        };
        let solve = |b: &[f64]| -> Result<Vec<f64>> {
            let rhs: Vec<C64> = b.iter().map(|&v| C64::new(v, 0.0)).collect();
            let mut x = rhs.clone();
            fd.solve(&mut x, pre_shift);
            pcg(
                |v: &[C64], out: &mut [C64]| op.apply_shifted(v, out, z),
                |v: &mut [C64]| fd.solve(v, pre_shift),
                &rhs,
                &mut x,
                inner,
            )?;
            Ok(x.iter().map(|v| v.re).collect())
        };
        iterative_eigen(len, k, |x, y| op.apply(x, y), solve, opts.iterative)?
    };
    let scale = op.grid().cell_volume().sqrt().recip();
    let mut vectors = raw.vectors;
    let mut traces = Vec::with_capacity(vectors.len());
    for v in vectors.iter_mut() {
        v.iter_mut().for_each(|x| *x *= scale);
        let mut t = neumann_trace(op.grid(), v, opts.stencil);
        if leading_sign(&t) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            t.iter_mut().for_each(|x| *x = -*x);
        }
        traces.push(t);
    }
    let residuals = raw.residuals.iter().map(|r| r * scale).collect();
    Ok(EigenPairs {
        values: raw.values,
        vectors,
        traces,
        residuals,
    })
}

/// Sign of the first trace entry whose magnitude is maximal up to a relative `1e-8`.
fn leading_sign(trace: &[f64]) -> f64 {
    let max = trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    trace
        .iter()
        .find(|v| v.abs() >= max * (1.0 - 1e-8))
        .map(|v| v.signum())
        .unwrap_or(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsdMeta {
    pub potential: Option<PotentialSpec>,
    pub potential_sha256: String,
    pub grid_sha256: String,
    pub stencil: TraceStencil,
    pub tool_version: String,
}

/// Boundary spectral data: eigenvalues and Neumann traces of the eigenfunctions.
#[derive(Clone, Debug, PartialEq)]
pub struct Bsd {
    pub grid: GridSpec,
    pub eigenvalues: Vec<f64>,
    /// `traces[k][b]` is the trace of the k-th eigenfunction at boundary node `b`.
    pub traces: Vec<Vec<f64>>,
    pub meta: BsdMeta,
}

impl Bsd {
    pub fn from_pairs(op: &DiscreteOperator, pairs: &EigenPairs, stencil: TraceStencil) -> Self {
        Bsd {
            grid: op.grid().spec(),
            eigenvalues: pairs.values.clone(),
            traces: pairs.traces.clone(),
            meta: BsdMeta {
                potential: op.spec().cloned(),
                potential_sha256: crate::io::sha256_f64(&op.potential().values),
                grid_sha256: crate::io::sha256_grid(&op.grid().spec()),
                stencil,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn boundary_len(&self) -> usize {
        self.traces.first().map_or(0, |t| t.len())
    }

    pub fn truncated(&self, k: usize) -> Bsd {
        let k = k.min(self.len());
        Bsd {
            grid: self.grid,
            eigenvalues: self.eigenvalues[..k].to_vec(),
            traces: self.traces[..k].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Data of `q + c`: eigenfunctions are unchanged and eigenvalues move by `c`.
    pub fn shifted(&self, c: f64) -> Bsd {
        let mut meta = self.meta.clone();
        meta.potential = meta
            .potential
            .map(|p| p.plus(&PotentialSpec::Constant { value: c }));
        meta.potential_sha256 = format!("shifted({c:e}):{}", self.meta.potential_sha256);
        Bsd {
            grid: self.grid,
            eigenvalues: self.eigenvalues.iter().map(|l| l + c).collect(),
            traces: self.traces.clone(),
            meta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let grid = Grid::new(self.grid)?;
        if self.traces.len() != self.eigenvalues.len() {
            return Err(Error::SizeMismatch {
                expected: self.eigenvalues.len(),
                got: self.traces.len(),
            });
        }
        for t in &self.traces {
            if t.len() != grid.boundary().len() {
                return Err(Error::SizeMismatch {
                    expected: grid.boundary().len(),
                    got: t.len(),
                });
            }
        }
        if self.eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Format("eigenvalues are not ascending".into()));
        }
        Ok(())
    }
}

/// Computes `k` eigenpairs and returns the boundary spectral data with the pairs.
pub fn make_bsd(op: &DiscreteOperator, k: usize, opts: &EigenSolverOptions) -> Result<(Bsd, EigenPairs)> {
    let pairs = eigs(op, k, opts)?;
    Ok((Bsd::from_pairs(op, &pairs, opts.stencil), pairs))
}

/// Common truncation length of two data sets on the same grid.
pub fn common_len(a: &Bsd, b: &Bsd) -> Result<usize> {
    if a.grid != b.grid {
        return Err(Error::Incompatible(format!(
            "grids differ: {:?} vs {:?}",
            a.grid, b.grid
        )));
    }
    if a.boundary_len() != b.boundary_len() {
        return Err(Error::Incompatible("boundary meshes differ".into()));
    }
    if a.meta.stencil != b.meta.stencil {
        return Err(Error::Incompatible("trace stencils differ".into()));
    }
    Ok(a.len().min(b.len()))
}

/// Returns `b` with `ψ_{2,k}` negated wherever `<ψ_{1,k}, ψ_{2,k}>_Γ < 0`, so
/// each difference `ψ_{1,k} - ψ_{2,k}` is the smaller of the two choices.
pub fn align_bsd(a: &Bsd, b: &Bsd) -> Result<Bsd> {
    common_len(a, b)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let grid = Grid::new(a.grid)?;
    let mesh = grid.boundary();
    let mut out = b.clone();
    for (pa, pb) in a.traces.iter().zip(out.traces.iter_mut()) {
        if mesh.inner(pa, pb).re < 0.0 {
            pb.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(out)
}
