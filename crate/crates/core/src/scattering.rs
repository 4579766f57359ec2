//! Remainder solves for the probes, the boundary functional
//! `S = <∂_ν u+, f->_Γ`, and its spectral-series representations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{neumann_trace, Bsd, DiscreteOperator, EigenPairs, TraceStencil};
use crate::linalg::{gmres, BandedLu, FastDirichlet, KrylovOptions};
use crate::probe::{IsozakiProbe, Sign};
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// `Auto` factors directly when `unknowns * bandwidth²` stays below this.
    pub direct_work_limit: f64,
    /// Required `||(A - z) v - rhs|| / ||rhs||` on return.
    pub residual_tol: f64,
    pub gmres_tol: f64,
    /// Restart length; 0 picks one from the available memory.
    pub restart: usize,
    pub max_iter: usize,
    pub stencil: TraceStencil,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            direct_work_limit: 3e8,
            residual_tol: 1e-10,
            gmres_tol: 1e-12,
            restart: 0,
            max_iter: 3000,
            stencil: TraceStencil::TwoPoint,
        }
    }
}

/// Solves `(A - z) x = rhs`, checking the residual before returning it.
pub fn solve_shifted(op: &DiscreteOperator, z: C64, rhs: &[C64], opts: &SolverOptions) -> Result<(Vec<C64>, f64)> {
    let zero = C64::new(0.0, 0.0);
    if rhs.iter().all(|v| *v == zero) {
        return Ok((vec![zero; rhs.len()], 0.0));
    }
    let g = op.grid();
    let len = g.len();
    let band = g.n().pow(g.dim() as u32 - 1);
    let direct = match opts.kind {
        SolverKind::Direct => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => (len as f64) * (band as f64).powi(2) <= opts.direct_work_limit,
    };
    let x = if direct {
        let lu = BandedLu::factor(len, band, band, |r, c| shifted_entry(op, z, r, c))?;
        let mut x = rhs.to_vec();
        lu.solve(&mut x);
        let res = residual(op, z, &x, rhs);
        if res > opts.residual_tol {
            // One step of iterative refinement.
            let mut r = vec![zero; len];
            op.apply_shifted(&x, &mut r, z);
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
            }
            lu.solve(&mut r);
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += ri;
            }
        }
        x
    } else {
        let fd = FastDirichlet::new(g.n(), g.dim(), g.h());
        let shift = C64::new(op.potential().mean(), 0.0) - z;
        let restart = if opts.restart > 0 {
            opts.restart
        } else {
            let per_vector = 16.0 * len as f64;
            ((1.2e9 / per_vector) as usize).clamp(3, 30)
        };
        let mut x = rhs.to_vec();
        fd.solve(&mut x, shift);
        gmres(
            |v: &[C64], out: &mut [C64]| op.apply_shifted(v, out, z),
            |v: &mut [C64]| fd.solve(v, shift),
            rhs,
            &mut x,
            KrylovOptions {
                tol: opts.gmres_tol,
                restart,
                max_iter: opts.max_iter,
            },
        )?;
        x
    };
    let res = residual(op, z, &x, rhs);
    if res > opts.residual_tol {
        return Err(Error::NotConverged {
            what: "shifted Schrödinger solve",
            residual: res,
            iterations: 0,
        });
    }
    Ok((x, res))
}

fn shifted_entry(op: &DiscreteOperator, z: C64, r: usize, c: usize) -> C64 {
    let g = op.grid();
    let inv_h2 = 1.0 / (g.h() * g.h());
    if r == c {
        return C64::new(2.0 * g.dim() as f64 * inv_h2 + op.potential().values[r], 0.0) - z;
    }
    let (lo, hi) = if r < c { (r, c) } else { (c, r) };
    let diff = hi - lo;
    for a in 0..g.dim() {
        let s = g.strides()[a];
        if diff == s && (lo / s) % g.n() != g.n() - 1 {
            return C64::new(-inv_h2, 0.0);
        }
    }
    C64::new(0.0, 0.0)
}

fn residual(op: &DiscreteOperator, z: C64, x: &[C64], rhs: &[C64]) -> f64 {
    let mut r = vec![C64::new(0.0, 0.0); x.len()];
    op.apply_shifted(x, &mut r, z);
    let num: f64 = r.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = rhs.iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Solution of `(-Δ + q - z) u = 0`, `u = f` on the boundary, split as `u = f + v`.
#[derive(Clone, Debug)]
pub struct ScatteringSolution {
    pub z: C64,
    pub sign: Sign,
    /// Remainder at the interior nodes; it vanishes on the boundary.
    pub remainder: Vec<C64>,
    /// Discrete trace of the remainder.
    pub remainder_trace: Vec<C64>,
    /// Outward normal derivative of `u` at the boundary nodes.
    pub neumann: Vec<C64>,
    pub residual: f64,
}

impl ScatteringSolution {
    pub fn field(&self, op: &DiscreteOperator, probe: &IsozakiProbe) -> Vec<C64> {
        let f = probe.on_grid(self.sign, op.grid());
        f.iter().zip(&self.remainder).map(|(a, b)| a + b).collect()
    }
}

/// `v = -(A - z)^-1 (q + λ± - z) f±` and `∂_ν u = ∂_ν f± + D v`.
pub fn solve_u(
    op: &DiscreteOperator,
    probe: &IsozakiProbe,
    sign: Sign,
    z: C64,
    opts: &SolverOptions,
) -> Result<ScatteringSolution> {
    let lambda = probe.lambda(sign);
    let g = op.grid();
    let q = &op.potential().values;
    let rhs: Vec<C64> = g
        .points()
        .zip(q)
        .map(|(x, &qk)| -(C64::new(qk, 0.0) + lambda - z) * probe.eval(sign, &x))
        .collect();
    let (remainder, residual) = solve_shifted(op, z, &rhs, opts)?;
    drop(rhs);
    let remainder_trace = neumann_trace(g, &remainder, opts.stencil);
    let analytic = probe.normal_derivative_on_boundary(sign, g.boundary());
    let neumann = analytic.iter().zip(&remainder_trace).map(|(a, b)| a + b).collect();
    Ok(ScatteringSolution {
        z,
        sign,
        remainder,
        remainder_trace,
        neumann,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsozakiValue {
    pub s: C64,
    pub xi: Vec<f64>,
    pub tau: f64,
    pub potential_sha256: String,
    pub residual: f64,
}

/// `S = <∂_ν u+, f->_Γ` with `u+` solved at `z = λ+`.
pub fn isozaki_s(op: &DiscreteOperator, probe: &IsozakiProbe, opts: &SolverOptions) -> Result<IsozakiValue> {
    let sol = solve_u(op, probe, Sign::Plus, probe.lambda(Sign::Plus), opts)?;
    let mesh = op.grid().boundary();
    // The analytic part uses the combined exponent so that ξ = 0 pairs to zero exactly.
    let k = probe.wavenumber(Sign::Plus);
    let eta = probe.direction(Sign::Plus);
    let analytic: Vec<C64> = mesh
        .nodes
        .iter()
        .map(|b| {
            let en: f64 = eta.iter().zip(&b.normal).map(|(e, n)| e * n).sum();
            C64::i() * k * en * probe.product(&b.position)
        })
        .collect();
    let ones = vec![1.0; mesh.len()];
    let fm = probe.on_boundary(Sign::Minus, mesh);
    let s = mesh.inner(&analytic, &ones) + mesh.inner(&sol.remainder_trace, &fm);
    Ok(IsozakiValue {
        s,
        xi: probe.xi().to_vec(),
        tau: probe.tau(),
        potential_sha256: crate::io::sha256_f64(&op.potential().values),
        residual: sol.residual,
    })
}

/// `∫ q v conj(f-)` for the remainder of `u+`.
pub fn remainder_pairing(op: &DiscreteOperator, probe: &IsozakiProbe, sol: &ScatteringSolution) -> C64 {
    let g = op.grid();
    let qv: Vec<C64> = sol
        .remainder
        .iter()
        .zip(&op.potential().values)
        .map(|(v, q)| v * q)
        .collect();
    let fm = probe.on_grid(Sign::Minus, g);
    g.inner(&qv, &fm)
}

/// `<f, ψ_k>_Γ` for every `k < count`.
pub fn boundary_coefficients(bsd: &Bsd, mesh: &crate::geometry::BoundaryMesh, f: &[C64], count: usize) -> Vec<C64> {
    bsd.traces[..count].iter().map(|psi| mesh.inner(f, psi)).collect()
}

fn check_count(bsd: &Bsd, k: usize) -> Result<()> {
    if k > bsd.len() {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: bsd.len(),
        });
    }
    Ok(())
}

fn guard(w: C64) -> Result<C64> {
    if w.norm() < 1e-12 {
        return Err(Error::Singular("spectral parameter hits an eigenvalue".into()));
    }
    Ok(w)
}

/// `(μ - λ) Σ_{k<K} <f, ψ_k> ψ_k / ((λ - λ_k)(μ - λ_k))` on the boundary.
pub fn series_neumann_diff(
    bsd: &Bsd,
    probe: &IsozakiProbe,
    sign: Sign,
    lambda: C64,
    mu: C64,
    k: usize,
) -> Result<Vec<C64>> {
    check_count(bsd, k)?;
    let grid = crate::geometry::Grid::new(bsd.grid)?;
    let mesh = grid.boundary();
    let f = probe.on_boundary(sign, mesh);
    let coeffs = boundary_coefficients(bsd, mesh, &f, k);
    let mut out = vec![C64::new(0.0, 0.0); mesh.len()];
    for ((c, lk), psi) in coeffs.iter().zip(&bsd.eigenvalues).zip(&bsd.traces) {
        let w = (mu - lambda) * c / (guard(lambda - lk)? * guard(mu - lk)?);
        for (o, p) in out.iter_mut().zip(psi) {
            *o += w * p;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerms {
    pub a: C64,
    pub b: C64,
    pub c: C64,
}

impl SeriesTerms {
    pub fn total(&self) -> C64 {
        self.a + self.b + self.c
    }
}

/// The limit `μ → -∞` of the series for `S_1 - S_2`, summed over `k < K`
/// and split into its three closed-form families.
pub fn series_s_diff(bsd1: &Bsd, bsd2: &Bsd, probe: &IsozakiProbe, k: usize) -> Result<SeriesTerms> {
    let common = crate::forward::common_len(bsd1, bsd2)?;
    if k > common {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: common,
        });
    }
    let grid = crate::geometry::Grid::new(bsd1.grid)?;
    let mesh = grid.boundary();
    let fp = probe.on_boundary(Sign::Plus, mesh);
    let fm = probe.on_boundary(Sign::Minus, mesh);
    let lambda = probe.lambda(Sign::Plus);
    let zero = C64::new(0.0, 0.0);
    let mut terms = SeriesTerms {
        a: zero,
        b: zero,
        c: zero,
    };
    for j in 0..k {
        let (psi1, psi2) = (&bsd1.traces[j], &bsd2.traces[j]);
        let (l1, l2) = (bsd1.eigenvalues[j], bsd2.eigenvalues[j]);
        let p1 = mesh.inner(&fp, psi1);
        let p2 = mesh.inner(&fp, psi2);
        let m1 = mesh.inner(&fm, psi1).conj();
        let m2 = mesh.inner(&fm, psi2).conj();
        let r1 = guard(lambda - l1)?;
        let r2 = guard(lambda - l2)?;
        if psi1 != psi2 {
            terms.a += (p1 - p2) * m1 / r1;
            terms.b += p2 * (m1 - m2) / r1;
        }
        if l1 != l2 {
            terms.c += (l1 - l2) / (r1 * r2) * p2 * m2;
        }
    }
    Ok(terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityPair {
    /// `<u_z, φ_k>_Ω` from the solved field.
    pub projection: C64,
    /// `<f, ψ_k>_Γ / (z - λ_k)` from boundary data alone.
    pub boundary: C64,
}

pub fn duality_coeff(
    op: &DiscreteOperator,
    probe: &IsozakiProbe,
    sign: Sign,
    z: C64,
    pairs: &EigenPairs,
    k: usize,
    opts: &SolverOptions,
) -> Result<DualityPair> {
    if k >= pairs.len() {
        return Err(Error::TooManyEigenpairs {
            requested: k + 1,
            available: pairs.len(),
        });
    }
    let sol = solve_u(op, probe, sign, z, opts)?;
    Ok(duality_from_solution(op, probe, &sol, pairs, k))
}

pub fn duality_from_solution(
    op: &DiscreteOperator,
    probe: &IsozakiProbe,
    sol: &ScatteringSolution,
    pairs: &EigenPairs,
    k: usize,
) -> DualityPair {
    let g = op.grid();
    let u = sol.field(op, probe);
    let projection = g.inner(&u, &pairs.vectors[k]);
    let f = probe.on_boundary(sol.sign, g.boundary());
    let boundary = g.boundary().inner(&f, &pairs.traces[k]) / (sol.z - pairs.values[k]);
    DualityPair {
        projection,
        boundary,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalReport {
    /// `Σ_k |<f, ψ_k>|² / |z - λ_k|²`.
    pub series: f64,
    /// `||u_z||²` on the grid.
    pub norm_sqr: f64,
}

impl ParsevalReport {
    pub fn relative_gap(&self) -> f64 {
        (self.series - self.norm_sqr).abs() / self.norm_sqr
    }
}

pub fn parseval_gap(
    op: &DiscreteOperator,
    probe: &IsozakiProbe,
    sign: Sign,
    z: C64,
    bsd: &Bsd,
    opts: &SolverOptions,
) -> Result<ParsevalReport> {
    let sol = solve_u(op, probe, sign, z, opts)?;
    let g = op.grid();
    let u = sol.field(op, probe);
    let norm_sqr = g.norm(&u).powi(2);
    let f = probe.on_boundary(sign, g.boundary());
    let coeffs = boundary_coefficients(bsd, g.boundary(), &f, bsd.len());
    let series = coeffs
        .iter()
        .zip(&bsd.eigenvalues)
        .map(|(c, l)| c.norm_sqr() / (z - l).norm_sqr())
        .sum();
    Ok(ParsevalReport { series, norm_sqr })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatteningRow {
    pub mu: f64,
    pub norm: f64,
}

/// `||∂_ν u_{1,μ} - ∂_ν u_{2,μ}||_{L^p(Γ)}` with `p = 2d / (d + 2)`, for the `+` probe.
pub fn neumann_flattening(
    op1: &DiscreteOperator,
    op2: &DiscreteOperator,
    probe: &IsozakiProbe,
    mus: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<FlatteningRow>> {
    if op1.grid().spec() != op2.grid().spec() {
        return Err(Error::Incompatible("operators live on different grids".into()));
    }
    let d = op1.grid().dim() as f64;
    let p = 2.0 * d / (d + 2.0);
    mus.iter()
        .map(|&mu| {
            let z = C64::new(mu, 0.0);
            let s1 = solve_u(op1, probe, Sign::Plus, z, opts)?;
            let s2 = solve_u(op2, probe, Sign::Plus, z, opts)?;
            let diff: Vec<C64> = s1
                .remainder_trace
                .iter()
                .zip(&s2.remainder_trace)
                .map(|(a, b)| a - b)
                .collect();
            Ok(FlatteningRow {
                mu,
                norm: op1.grid().boundary().norm(&diff, p),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{make_bsd, EigenSolverOptions};
    use crate::geometry::make_grid;
    use crate::potential::PotentialSpec;

    fn bump_op(n: usize, a: f64, c: [f64; 2], w: f64) -> DiscreteOperator {
        let g = make_grid(2, 1.0, n).unwrap();
        DiscreteOperator::from_spec(&g, &PotentialSpec::bump(a, &c, w)).unwrap()
    }

    #[test]
    fn direct_and_iterative_agree() {
        let op = bump_op(15, 2.0, [0.4, 0.5], 0.2);
        let probe = IsozakiProbe::with_default_direction(&[2.0, 1.0], 6.0).unwrap();
        let z = probe.lambda(Sign::Plus);
        let direct = solve_u(&op, &probe, Sign::Plus, z, &SolverOptions {
            kind: SolverKind::Direct,
            ..Default::default()
        })
        .unwrap();
        let iterative = solve_u(&op, &probe, Sign::Plus, z, &SolverOptions {
            kind: SolverKind::Iterative,
            ..Default::default()
        })
        .unwrap();
        assert!(direct.residual <= 1e-10 && iterative.residual <= 1e-10);
        for (a, b) in direct.remainder.iter().zip(&iterative.remainder) {
            assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn free_operator_has_zero_remainder_and_zero_functional_at_origin() {
        let g = make_grid(2, 1.0, 11).unwrap();
        let op = DiscreteOperator::from_spec(&g, &PotentialSpec::zero()).unwrap();
        let probe = IsozakiProbe::with_default_direction(&[0.0, 0.0], 5.0).unwrap();
        let sol = solve_u(&op, &probe, Sign::Plus, probe.lambda(Sign::Plus), &Default::default()).unwrap();
        assert!(sol.remainder.iter().all(|v| v.norm() == 0.0));
        let s = isozaki_s(&op, &probe, &Default::default()).unwrap();
        assert_eq!(s.s, C64::new(0.0, 0.0));
    }

    #[test]
    fn identical_potentials_give_identical_functionals() {
        let op = bump_op(11, 1.0, [0.5, 0.5], 0.2);
        let probe = IsozakiProbe::with_default_direction(&[1.0, -2.0], 5.0).unwrap();
        let a = isozaki_s(&op, &probe, &Default::default()).unwrap();
        let b = isozaki_s(&op.clone(), &probe, &Default::default()).unwrap();
        assert_eq!(a.s - b.s, C64::new(0.0, 0.0));
    }

    #[test]
    fn series_with_identical_data_is_exactly_zero() {
        let op = bump_op(9, 1.0, [0.5, 0.5], 0.2);
        let (bsd, _) = make_bsd(&op, 30, &EigenSolverOptions::default()).unwrap();
        let probe = IsozakiProbe::with_default_direction(&[3.0, 1.0], 8.0).unwrap();
        for k in [0, 5, 30] {
            let t = series_s_diff(&bsd, &bsd, &probe, k).unwrap();
            assert_eq!(t.total(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn constant_shift_has_only_eigenvalue_term() {
        let op = bump_op(9, 1.0, [0.5, 0.5], 0.2);
        let (bsd, _) = make_bsd(&op, 40, &EigenSolverOptions::default()).unwrap();
        let probe = IsozakiProbe::with_default_direction(&[0.0, 0.0], 8.0).unwrap();
        let t = series_s_diff(&bsd, &bsd.shifted(0.1), &probe, 40).unwrap();
        assert_eq!(t.a, C64::new(0.0, 0.0));
        assert_eq!(t.b, C64::new(0.0, 0.0));
        assert!(t.c.norm() > 0.0);
    }

    #[test]
    fn series_neumann_diff_vanishes_for_equal_parameters() {
        let op = bump_op(9, 1.0, [0.5, 0.5], 0.2);
        let (bsd, _) = make_bsd(&op, 10, &EigenSolverOptions::default()).unwrap();
        let probe = IsozakiProbe::with_default_direction(&[1.0, 0.0], 4.0).unwrap();
        let z = probe.lambda(Sign::Plus);
        let d = series_neumann_diff(&bsd, &probe, Sign::Plus, z, z, 10).unwrap();
        assert!(d.iter().all(|v| v.norm() == 0.0));
        assert!(series_neumann_diff(&bsd, &probe, Sign::Plus, z, z, 11).is_err());
    }

    #[test]
    fn full_spectrum_series_matches_two_solves_for_discrete_helmholtz_data() {
        // For a grid-exact plane wave the series identity holds to round-off.
        let op = bump_op(9, 1.0, [0.5, 0.5], 0.2);
        let n = op.len();
        let (_, pairs) = make_bsd(&op, n, &EigenSolverOptions::default()).unwrap();
        let probe = IsozakiProbe::with_default_direction(&[0.0, 0.0], 3.0).unwrap();
        let z = probe.lambda(Sign::Plus);
        let sol = solve_u(&op, &probe, Sign::Plus, z, &Default::default()).unwrap();
        for k in [0, 3, 17] {
            let d = duality_from_solution(&op, &probe, &sol, &pairs, k);
            // The continuous plane wave is not a grid solution; agreement is approximate.
            assert!((d.projection - d.boundary).norm() <= 0.05 * d.projection.norm().max(1e-3), "{k}");
        }
    }

    #[test]
    fn flattening_is_zero_for_equal_potentials() {
        let op = bump_op(9, 1.0, [0.5, 0.5], 0.2);
        let probe = IsozakiProbe::with_default_direction(&[0.0, 0.0], 2.0).unwrap();
        let rows = neumann_flattening(&op, &op, &probe, &[-10.0, -100.0], &Default::default()).unwrap();
        assert!(rows.iter().all(|r| r.norm == 0.0));
    }
}
