//! Fourier samples of `q1 - q2` from boundary data, low-pass inversion with the
//! stability cutoff, and negative-order Sobolev error norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::forward::{common_len, Bsd, DiscreteOperator};
use crate::geometry::{Grid, GridSpec};
use crate::probe::IsozakiProbe;
use crate::scattering::{isozaki_s, series_s_diff, SolverOptions};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub value: f64,
    pub tail_start: usize,
    pub count: usize,
}

/// `max_{N0 <= k < K} |λ_{1,k} - λ_{2,k}|`; `N0` defaults to `K / 2`.
pub fn estimate_lambda(bsd1: &Bsd, bsd2: &Bsd, tail_start: Option<usize>) -> Result<LambdaEstimate> {
    let k = common_len(bsd1, bsd2)?;
    if k == 0 {
        return Err(Error::Degenerate("no eigenvalues to compare".into()));
    }
    let n0 = tail_start.unwrap_or(k / 2);
    if n0 >= k {
        return Err(Error::InvalidArgument(format!(
            "tail start {n0} must be below the number of eigenvalues {k}"
        )));
    }
    let value = (n0..k)
        .map(|j| (bsd1.eigenvalues[j] - bsd2.eigenvalues[j]).abs())
        .fold(0.0, f64::max);
    Ok(LambdaEstimate {
        value,
        tail_start: n0,
        count: k,
    })
}

/// Partial sums of `||ψ_{1,k} - ψ_{2,k}||²_{L²(Γ)}`.
pub fn hypothesis_sum(bsd1: &Bsd, bsd2: &Bsd) -> Result<Vec<f64>> {
    let k = common_len(bsd1, bsd2)?;
    let grid = Grid::new(bsd1.grid)?;
    let mesh = grid.boundary();
    let mut acc = 0.0;
    Ok((0..k)
        .map(|j| {
            let d: Vec<f64> = bsd1.traces[j]
                .iter()
                .zip(&bsd2.traces[j])
                .map(|(a, b)| a - b)
                .collect();
            acc += mesh.norm2(&d).powi(2);
            acc
        })
        .collect())
}

/// Uniform frequency lattice `spacing * Z^d` restricted to the ball `|ξ| <= radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLattice {
    pub dim: usize,
    pub spacing: f64,
    pub radius: f64,
}

impl FrequencyLattice {
    /// Lattice with spacing `2π / L`, matching the box period.
    pub fn for_box(dim: usize, side: f64, radius: f64) -> Self {
        FrequencyLattice {
            dim,
            spacing: 2.0 * PI / side,
            radius,
        }
    }

    /// All lattice points in lexicographic order of their integer coordinates.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let m = (self.radius / self.spacing).floor() as i64;
        let width = (2 * m + 1) as usize;
        let total = width.pow(self.dim as u32);
        let mut out = Vec::new();
        for t in 0..total {
            let mut rem = t;
            let mut idx = vec![0i64; self.dim];
            for a in (0..self.dim).rev() {
                idx[a] = (rem % width) as i64 - m;
                rem /= width;
            }
            let xi: Vec<f64> = idx.iter().map(|&i| i as f64 * self.spacing).collect();
            if norm(&xi) <= self.radius * (1.0 + 1e-12) {
                out.push(xi);
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// True if the first nonzero coordinate is positive.
fn is_canonical(xi: &[f64]) -> bool {
    xi.iter().find(|v| **v != 0.0).is_some_and(|v| *v > 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauPolicy {
    Fixed { tau: f64 },
    /// `τ = factor * max(floor, |ξ|)`.
    Scaled { factor: f64, floor: f64 },
}

impl Default for TauPolicy {
    fn default() -> Self {
        TauPolicy::Scaled {
            factor: 64.0,
            floor: 1.0,
        }
    }
}

impl TauPolicy {
    pub fn tau(&self, xi: &[f64]) -> Result<f64> {
        let r = norm(xi);
        let tau = match *self {
            TauPolicy::Fixed { tau } => tau,
            TauPolicy::Scaled { factor, floor } => factor * floor.max(r),
        };
        if !(tau >= r.max(1.0)) {
            return Err(Error::InvalidProbe(format!(
                "τ = {tau} is below max(1, |ξ|) = {}",
                r.max(1.0)
            )));
        }
        Ok(tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    Series,
    #[serde(rename = "direct-s")]
    Direct,
}

impl SampleMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SampleMethod::Series => "series",
            SampleMethod::Direct => "direct-s",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(SampleMethod::Series),
            "direct" | "direct-s" | "direct-S" => Ok(SampleMethod::Direct),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Where the boundary functional comes from.
pub enum SampleSource<'a> {
    Series { bsd1: &'a Bsd, bsd2: &'a Bsd, count: usize },
    Direct {
        op1: &'a DiscreteOperator,
        op2: &'a DiscreteOperator,
        solver: SolverOptions,
    },
}

impl SampleSource<'_> {
    pub fn method(&self) -> SampleMethod {
        match self {
            SampleSource::Series { .. } => SampleMethod::Series,
            SampleSource::Direct { .. } => SampleMethod::Direct,
        }
    }

    /// `S_1 - S_2` for one probe.
    pub fn difference(&self, probe: &IsozakiProbe) -> Result<C64> {
        match self {
            SampleSource::Series { bsd1, bsd2, count } => {
                Ok(series_s_diff(bsd1, bsd2, probe, *count)?.total())
            }
            SampleSource::Direct { op1, op2, solver } => {
                let s1 = isozaki_s(op1, probe, solver)?;
                let s2 = isozaki_s(op2, probe, solver)?;
                Ok(s1.s - s2.s)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub tau: TauPolicy,
    /// Extrapolates `(2^p S(2τ) - S(τ)) / (2^p - 1)` when set.
    pub extrapolation_order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSample {
    pub xi: Vec<f64>,
    pub value: C64,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSamples {
    pub dim: usize,
    pub spacing: f64,
    /// Radius of the sampled ball.
    pub radius: f64,
    pub method: SampleMethod,
    pub samples: Vec<FourierSample>,
}

impl FourierSamples {
    pub fn max_radius(&self) -> f64 {
        self.samples.iter().map(|s| norm(&s.xi)).fold(0.0, f64::max)
    }

    /// Largest `|q(ξ) - conj(q(-ξ))|` over sample pairs present in the set.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let neg: Vec<f64> = s.xi.iter().map(|v| -v).collect();
            if let Some(t) = self.samples.iter().find(|t| t.xi == neg) {
                worst = worst.max((s.value - t.value.conj()).norm());
            }
        }
        worst
    }
}

fn estimate(source: &SampleSource, xi: &[f64], tau: f64, opts: &SamplingOptions) -> Result<C64> {
    let probe = IsozakiProbe::with_default_direction(xi, tau)?;
    let base = source.difference(&probe)?;
    match opts.extrapolation_order {
        None => Ok(base),
        Some(p) => {
            let probe2 = IsozakiProbe::with_default_direction(xi, 2.0 * tau)?;
            let fine = source.difference(&probe2)?;
            let w = 2f64.powf(p);
            Ok((fine * w - base) / (w - 1.0))
        }
    }
}

/// Samples `q1 - q2` hat on every lattice point. Each pair `±ξ` is symmetrized
/// as `(S(ξ) + conj S(-ξ)) / 2`, so the result is exactly Hermitian.
/// Frequencies are processed in parallel and gathered in lattice order.
pub fn fourier_sample(
    source: &SampleSource,
    lattice: &FrequencyLattice,
    opts: &SamplingOptions,
) -> Result<FourierSamples> {
    let points = lattice.points();
    if points.is_empty() {
        return Err(Error::InsufficientCoverage("frequency lattice is empty".into()));
    }
    let canonical: Vec<&Vec<f64>> = points
        .iter()
        .filter(|xi| is_canonical(xi) || xi.iter().all(|v| *v == 0.0))
        .collect();
    let values: Vec<Result<(C64, f64)>> = canonical
        .par_iter()
        .map(|xi| {
            let tau = opts.tau.tau(xi)?;
            let plus = estimate(source, xi, tau, opts)?;
            if xi.iter().all(|v| *v == 0.0) {
                return Ok((C64::new(plus.re, 0.0), tau));
            }
            let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
            let minus = estimate(source, &neg, tau, opts)?;
            Ok(((plus + minus.conj()) * 0.5, tau))
        })
        .collect();
    let mut by_point = Vec::with_capacity(points.len());
    let mut table: Vec<(Vec<f64>, C64, f64)> = Vec::with_capacity(canonical.len());
    for (xi, v) in canonical.iter().zip(values) {
        let (value, tau) = v?;
        table.push(((*xi).clone(), value, tau));
    }
    for xi in &points {
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let sample = if let Some((_, v, tau)) = table.iter().find(|(p, _, _)| p == xi) {
            FourierSample {
                xi: xi.clone(),
                value: *v,
                tau: *tau,
            }
        } else {
            let (_, v, tau) = table
                .iter()
                .find(|(p, _, _)| *p == neg)
                .expect("lattice is symmetric");
            FourierSample {
                xi: xi.clone(),
                value: v.conj(),
                tau: *tau,
            }
        };
        by_point.push(sample);
    }
    Ok(FourierSamples {
        dim: lattice.dim,
        spacing: lattice.spacing,
        radius: lattice.radius,
        method: source.method(),
        samples: by_point,
    })
}

/// `r = calibration * Λ^(-2/denominator)`; with exact data (`Λ = 0`) the
/// full sampled radius is used.
pub fn choose_cutoff(lambda: f64, calibration: f64, denominator: f64, max_radius: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("Λ must be non-negative, got {lambda}")));
    }
    if !(calibration > 0.0) || !(denominator > 0.0) {
        return Err(Error::InvalidArgument("calibration and denominator must be positive".into()));
    }
    if lambda == 0.0 {
        return Ok(max_radius);
    }
    Ok(calibration * lambda.powf(-2.0 / denominator))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub field: Vec<f64>,
    /// `||Im q_rec|| / ||Re q_rec||` (absolute when the real part vanishes).
    pub imaginary_residue: f64,
    pub modes: usize,
}

/// `q_rec(x) = (2π)^-d Δξ^d Σ_{|ξ_m| < r} q(ξ_m) e^{i ξ_m · x}`, real part.
pub fn invert(samples: &FourierSamples, r: f64, grid: &Grid) -> Result<InversionResult> {
    if samples.dim != grid.dim() {
        return Err(Error::Incompatible("sample and grid dimensions differ".into()));
    }
    if !(r > 0.0) || r > samples.radius * (1.0 + 1e-12) {
        return Err(Error::InsufficientCoverage(format!(
            "cutoff {r} is outside the sampled radius {}",
            samples.radius
        )));
    }
    let d = grid.dim() as i32;
    let weight = (samples.spacing / (2.0 * PI)).powi(d);
    let active: Vec<&FourierSample> = samples.samples.iter().filter(|s| norm(&s.xi) < r).collect();
    let mut re = Vec::with_capacity(grid.len());
    let mut im_sq = 0.0;
    let mut re_sq = 0.0;
    for x in grid.points() {
        let mut acc = C64::new(0.0, 0.0);
        for s in &active {
            let phase: f64 = s.xi.iter().zip(&x).map(|(a, b)| a * b).sum();
            acc += s.value * C64::new(0.0, phase).exp();
        }
        acc *= weight;
        re_sq += acc.re * acc.re;
        im_sq += acc.im * acc.im;
        re.push(acc.re);
    }
    let imaginary_residue = if re_sq > 0.0 {
        (im_sq / re_sq).sqrt()
    } else {
        im_sq.sqrt()
    };
    Ok(InversionResult {
        field: re,
        imaginary_residue,
        modes: active.len(),
    })
}

/// `Δξ^d Σ_{|ξ_m| < r} |q(ξ_m)|²` and the bound `sup|q|² Δξ^d #{|ξ_m| < r}`.
pub fn truncated_energy(samples: &FourierSamples, r: f64) -> (f64, f64) {
    let w = samples.spacing.powi(samples.dim as i32);
    let active: Vec<&FourierSample> = samples.samples.iter().filter(|s| norm(&s.xi) < r).collect();
    let energy = active.iter().map(|s| s.value.norm_sqr()).sum::<f64>() * w;
    let sup = active.iter().map(|s| s.value.norm()).fold(0.0, f64::max);
    (energy, sup * sup * w * active.len() as f64)
}

/// Frequency box `[-radius, radius]^d` with uniform `spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyQuadrature {
    pub radius: f64,
    pub spacing: f64,
}

impl FrequencyQuadrature {
    pub fn default_for(spec: &GridSpec) -> Self {
        if spec.dim == 2 {
            FrequencyQuadrature {
                radius: 80.0 / spec.side,
                spacing: PI / (12.0 * spec.side),
            }
        } else {
            FrequencyQuadrature {
                radius: 40.0 / spec.side,
                spacing: PI / (8.0 * spec.side),
            }
        }
    }

    fn nodes(&self) -> Vec<f64> {
        let m = (self.radius / self.spacing).floor() as i64;
        (-m..=m).map(|i| i as f64 * self.spacing).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HMinus1 {
    pub value: f64,
    /// Bound `||q||²_{L²} / radius²` on the squared contribution outside the box.
    pub tail_bound_sqr: f64,
}

/// `(2π)^-d ∫ (1 + |ξ|²)^-1 |q(ξ)|² dξ`, square-rooted, for the zero extension
/// of a grid field.
pub fn h_minus1_norm(field: &[f64], grid: &Grid, quad: &FrequencyQuadrature) -> Result<HMinus1> {
    if field.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            got: field.len(),
        });
    }
    let n = grid.n();
    let d = grid.dim();
    let h = grid.h();
    let nodes = quad.nodes();
    let nq = nodes.len();
    // Per-axis kernel e^{-i ξ x_j}.
    let kernel: Vec<C64> = nodes
        .iter()
        .flat_map(|&xi| (0..n).map(move |j| C64::new(0.0, -xi * (j as f64 + 1.0) * h).exp()))
        .collect();
    let vol = grid.cell_volume();
    let mut sum = 0.0;
    if d == 2 {
        // t[i][j2] = Σ_{j1} K[i][j1] q[j1][j2]
        let mut t = vec![C64::new(0.0, 0.0); nq * n];
        for i in 0..nq {
            let k = &kernel[i * n..(i + 1) * n];
            let row = &mut t[i * n..(i + 1) * n];
            for (j1, kv) in k.iter().enumerate() {
                let qrow = &field[j1 * n..(j1 + 1) * n];
                for (r, q) in row.iter_mut().zip(qrow) {
                    *r += kv * q;
                }
            }
        }
        for i in 0..nq {
            let row = &t[i * n..(i + 1) * n];
            for (l, &xl) in nodes.iter().enumerate() {
                let k = &kernel[l * n..(l + 1) * n];
                let v: C64 = row.iter().zip(k).map(|(a, b)| a * b).sum::<C64>() * vol;
                sum += v.norm_sqr() / (1.0 + nodes[i] * nodes[i] + xl * xl);
            }
        }
    } else {
        // Contract one axis at a time: q[j1][j2][j3] -> a[i1][j2][j3] -> b[i1][i2][j3].
        let mut a = vec![C64::new(0.0, 0.0); nq * n * n];
        for i1 in 0..nq {
            let k = &kernel[i1 * n..(i1 + 1) * n];
            let dst = &mut a[i1 * n * n..(i1 + 1) * n * n];
            for (j1, kv) in k.iter().enumerate() {
                let src = &field[j1 * n * n..(j1 + 1) * n * n];
                for (r, q) in dst.iter_mut().zip(src) {
                    *r += kv * q;
                }
            }
        }
        let mut b = vec![C64::new(0.0, 0.0); nq * n];
        for i1 in 0..nq {
            b.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let slab = &a[i1 * n * n..(i1 + 1) * n * n];
            for i2 in 0..nq {
                let k = &kernel[i2 * n..(i2 + 1) * n];
                let dst = &mut b[i2 * n..(i2 + 1) * n];
                for (j2, kv) in k.iter().enumerate() {
                    let src = &slab[j2 * n..(j2 + 1) * n];
                    for (r, q) in dst.iter_mut().zip(src) {
                        *r += kv * q;
                    }
                }
            }
            for i2 in 0..nq {
                let row = &b[i2 * n..(i2 + 1) * n];
                for (i3, &x3) in nodes.iter().enumerate() {
                    let k = &kernel[i3 * n..(i3 + 1) * n];
                    let v: C64 = row.iter().zip(k).map(|(a, b)| a * b).sum::<C64>() * vol;
                    sum += v.norm_sqr()
                        / (1.0 + nodes[i1] * nodes[i1] + nodes[i2] * nodes[i2] + x3 * x3);
                }
            }
        }
    }
    let value = (sum * (quad.spacing / (2.0 * PI)).powi(d as i32)).sqrt();
    let l2 = grid.norm(field);
    Ok(HMinus1 {
        value,
        tail_bound_sqr: l2 * l2 / (quad.radius * quad.radius),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub grid: GridSpec,
    pub cutoff: f64,
    pub lambda: f64,
    pub modes: usize,
    pub imaginary_residue: f64,
    pub h_minus1_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub field: Vec<f64>,
}

/// Inverts the samples with cutoff `r` and compares against `truth` when given.
pub fn reconstruct(
    samples: &FourierSamples,
    lambda: f64,
    r: f64,
    grid: &Grid,
    truth: Option<&[f64]>,
    quad: &FrequencyQuadrature,
) -> Result<ReconstructionResult> {
    let inv = invert(samples, r, grid)?;
    let (h_minus1_error, l2_error) = match truth {
        Some(t) => {
            if t.len() != grid.len() {
                return Err(Error::SizeMismatch {
                    expected: grid.len(),
                    got: t.len(),
                });
            }
            let diff: Vec<f64> = inv.field.iter().zip(t).map(|(a, b)| a - b).collect();
            (
                Some(h_minus1_norm(&diff, grid, quad)?.value),
                Some(grid.norm(&diff)),
            )
        }
        None => (None, None),
    };
    Ok(ReconstructionResult {
        grid: grid.spec(),
        cutoff: r,
        lambda,
        modes: inv.modes,
        imaginary_residue: inv.imaginary_residue,
        h_minus1_error,
        l2_error,
        field: inv.field,
    })
}
