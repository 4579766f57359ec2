//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line, then asserts.
//! Tests share a lock so that the large solves do not run concurrently.

use std::f64::consts::PI;
use std::sync::{Mutex, MutexGuard, OnceLock};

use isozaki_core::experiments::{
    fit_exponent, run_sweep, trace_growth_ratio, write_rows_csv, SweepConfig, SweepRow,
};
use isozaki_core::forward::{eigs, make_bsd};
use isozaki_core::probe::product_defect;
use isozaki_core::reconstruct::{
    choose_cutoff, estimate_lambda, fourier_sample, hypothesis_sum, invert, FrequencyLattice, SampleSource,
    SamplingOptions,
};
use isozaki_core::scattering::{isozaki_s, neumann_flattening, parseval_gap, series_neumann_diff, series_s_diff, solve_u};
use isozaki_core::{
    make_grid, Bsd, DiscreteOperator, EigenPairs, EigenSolverOptions, Grid, IsozakiProbe, PotentialSpec, Sign,
    SolverOptions, TauPolicy, TraceStencil, TrigBasis, TrigTerm, C64,
};

static HEAVY: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, passed: bool, detail: String) {
    println!("{} {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn first_bump() -> PotentialSpec {
    PotentialSpec::bump(1.0, &[0.5, 0.5], 0.15)
}

fn second_bump() -> PotentialSpec {
    PotentialSpec::bump(0.7, &[0.4, 0.6], 0.12)
}

/// `h^d Σ (q1 - q2)(x) e^{-iξ·x}` over the grid.
fn quadrature_hat(grid: &Grid, q1: &PotentialSpec, q2: &PotentialSpec, xi: &[f64]) -> C64 {
    let a = isozaki_core::potential::sample(q1, grid).unwrap();
    let b = isozaki_core::potential::sample(q2, grid).unwrap();
    grid.points()
        .zip(a.values.iter().zip(&b.values))
        .map(|(x, (u, v))| {
            let phase: f64 = xi.iter().zip(x.iter()).map(|(k, c)| k * c).sum();
            C64::new(0.0, -phase).exp() * (u - v)
        })
        .sum::<C64>()
        * grid.cell_volume()
}

/// Free Laplacian at h = 1/64 with its lowest 200 pairs.
fn free_pairs() -> &'static (DiscreteOperator, EigenPairs) {
    static CELL: OnceLock<(DiscreteOperator, EigenPairs)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = make_grid(2, 1.0, 63).unwrap();
        let op = DiscreteOperator::from_spec(&g, &PotentialSpec::zero()).unwrap();
        let pairs = eigs(&op, 200, &EigenSolverOptions::default()).unwrap();
        (op, pairs)
    })
}

#[test]
fn criterion_01_forward_eigenvalues() {
    let _guard = serial();
    let (op, pairs) = free_pairs();
    let h = op.grid().h();
    let discrete = 8.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let lam1 = pairs.values[0];
    let rel_discrete = (lam1 - discrete).abs() / discrete;
    let rel_continuum = (lam1 - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    let mut continuum: Vec<f64> = (1..=6)
        .flat_map(|j| (1..=6).map(move |k| PI * PI * (j * j + k * k) as f64))
        .collect();
    continuum.sort_by(f64::total_cmp);
    let worst = pairs.values[..10]
        .iter()
        .zip(&continuum)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    verdict(
        1,
        "forward eigenvalues",
        rel_discrete <= 1e-8 && rel_continuum <= 5e-3 && worst <= 0.02,
        format!(
            "λ1 vs discrete {rel_discrete:.3e} (≤ 1e-8), vs 2π² {rel_continuum:.3e} (≤ 5e-3), \
             first 10 vs continuum {worst:.3e} (≤ 0.02)"
        ),
    );
}

/// `min_± ||ψ_1 ∓ ψ_exact||_{L²(Γ)}` for the ground state of the free box.
fn ground_trace_error(n: usize, stencil: TraceStencil) -> (f64, f64) {
    let g = make_grid(2, 1.0, n).unwrap();
    let op = DiscreteOperator::from_spec(&g, &PotentialSpec::zero()).unwrap();
    let opts = EigenSolverOptions {
        stencil,
        ..Default::default()
    };
    let pairs = eigs(&op, 1, &opts).unwrap();
    let mesh = g.boundary();
    let exact: Vec<f64> = mesh
        .nodes
        .iter()
        .map(|b| {
            let along: f64 = b.position.iter().zip(&b.normal).map(|(x, nu)| x * (1.0 - nu.abs())).sum();
            -2.0 * PI * (PI * along).sin()
        })
        .collect();
    let t = &pairs.traces[0];
    let err = |s: f64| {
        let d: Vec<f64> = t.iter().zip(&exact).map(|(a, b)| a - s * b).collect();
        mesh.norm2(&d)
    };
    (mesh.norm2(t), err(1.0).min(err(-1.0)))
}

#[test]
fn criterion_02_trace_convergence() {
    let _guard = serial();
    let target = 2.0 * 2f64.sqrt() * PI;
    let mut lines = Vec::new();
    let mut ok = true;
    for stencil in [TraceStencil::TwoPoint, TraceStencil::ThreePoint] {
        let ns = [15usize, 31, 63, 127];
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        let mut norm63 = 0.0;
        for &n in &ns {
            let (norm, err) = ground_trace_error(n, stencil);
            if n == 63 {
                norm63 = norm;
            }
            hs.push(1.0 / (n as f64 + 1.0));
            errs.push(err);
        }
        let rel = (norm63 - target).abs() / target;
        let s = slope(&hs, &errs);
        ok &= rel <= 0.02 && (1.7..=2.3).contains(&s);
        lines.push(format!(
            "{stencil:?}: ||ψ1|| = {norm63:.6} rel {rel:.2e} (≤ 0.02), error slope {s:.3} (2 ± 0.3)"
        ));
    }
    verdict(2, "trace convergence", ok, lines.join("; "));
}

#[test]
fn criterion_03_probe_algebra() {
    let g = make_grid(2, 1.0, 63).unwrap();
    let mut unit: f64 = 0.0;
    for xi in [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0], [-2.5, 4.0], [7.0, -7.0]] {
        for tau in [10.0, 16.0, 64.0, 1000.0] {
            let p = IsozakiProbe::with_default_direction(&xi, tau).unwrap();
            for sign in [Sign::Plus, Sign::Minus] {
                let n: f64 = p.direction(sign).iter().map(|v| v * v).sum::<f64>().sqrt();
                unit = unit.max((n - 1.0).abs());
            }
        }
    }
    let origin = [8.0, 16.0, 32.0, 64.0]
        .iter()
        .map(|&t| product_defect(&IsozakiProbe::with_default_direction(&[0.0, 0.0], t).unwrap(), &g))
        .fold(0.0, f64::max);
    let taus = [8.0, 16.0, 32.0, 64.0];
    let defects: Vec<f64> = taus
        .iter()
        .map(|&t| product_defect(&IsozakiProbe::with_default_direction(&[2.0, 0.0], t).unwrap(), &g))
        .collect();
    let s = slope(&taus, &defects);
    verdict(
        3,
        "probe algebra",
        unit <= 1e-14 && origin == 0.0 && (-1.1..=-0.9).contains(&s),
        format!("max ||η|-1| = {unit:.2e} (≤ 1e-14), defect at ξ=0: {origin:e} (= 0), defect slope {s:.4} (-1 ± 0.1)"),
    );
}

#[test]
fn criterion_04_remainder_decay() {
    let _guard = serial();
    let g = make_grid(2, 1.0, 127).unwrap();
    let op = DiscreteOperator::from_spec(&g, &first_bump()).unwrap();
    let taus = [8.0, 16.0, 32.0, 64.0];
    let norms: Vec<f64> = taus
        .iter()
        .map(|&t| {
            let p = IsozakiProbe::with_default_direction(&[2.0, 0.0], t).unwrap();
            let sol = solve_u(&op, &p, Sign::Plus, p.lambda(Sign::Plus), &SolverOptions::default()).unwrap();
            g.norm(&sol.remainder)
        })
        .collect();
    let s = slope(&taus, &norms);
    verdict(
        4,
        "remainder decay",
        (-1.15..=-0.85).contains(&s),
        format!("||v|| = {norms:.4?}, slope {s:.4} in [-1.15, -0.85]"),
    );
}

fn formula_errors(grid: &Grid, q1: &PotentialSpec, q2: &PotentialSpec, freqs: &[Vec<f64>]) -> Vec<f64> {
    let op1 = DiscreteOperator::from_spec(grid, q1).unwrap();
    let op2 = DiscreteOperator::from_spec(grid, q2).unwrap();
    let opts = SolverOptions::default();
    freqs
        .iter()
        .map(|xi| {
            let p = IsozakiProbe::with_default_direction(xi, 64.0).unwrap();
            let diff = isozaki_s(&op1, &p, &opts).unwrap().s - isozaki_s(&op2, &p, &opts).unwrap().s;
            let hat = quadrature_hat(grid, q1, q2, xi);
            (diff - hat).norm() / hat.norm().max(1e-3)
        })
        .collect()
}

#[test]
fn criterion_05_isozaki_formula() {
    let _guard = serial();
    let g = make_grid(2, 1.0, 255).unwrap();
    let freqs: Vec<Vec<f64>> = [[0.0, 0.0], [2.0, 0.0], [0.0, 4.0], [4.0, 0.0], [2.8, 2.8], [1.0, 3.0]]
        .iter()
        .map(|v| v.to_vec())
        .collect();
    let errs = formula_errors(&g, &first_bump(), &second_bump(), &freqs);
    let worst2 = errs.iter().copied().fold(0.0, f64::max);
    drop(g);
    let g3 = make_grid(3, 1.0, 255).unwrap();
    let q1 = PotentialSpec::bump(1.0, &[0.5, 0.5, 0.5], 0.15);
    let q2 = PotentialSpec::bump(0.7, &[0.4, 0.6, 0.5], 0.12);
    let worst3 = formula_errors(&g3, &q1, &q2, &[vec![2.0, 0.0, 0.0]])[0];
    verdict(
        5,
        "isozaki formula at τ = 64",
        worst2 <= 0.10 && worst3 <= 0.10,
        format!("d=2 n=255 relative errors {errs:.4?} (≤ 0.10); d=3 n=255 ξ=(2,0,0): {worst3:.4} (≤ 0.10)"),
    );
}

fn pair_operators(n: usize) -> (DiscreteOperator, DiscreteOperator) {
    let g = make_grid(2, 1.0, n).unwrap();
    (
        DiscreteOperator::from_spec(&g, &first_bump()).unwrap(),
        DiscreteOperator::from_spec(&g, &second_bump()).unwrap(),
    )
}

fn full_bsd(op: &DiscreteOperator) -> Bsd {
    make_bsd(op, op.len(), &EigenSolverOptions::default()).unwrap().0
}

#[test]
fn criterion_06_series_identities() {
    let _guard = serial();
    let (op1, op2) = pair_operators(63);
    let b1 = full_bsd(&op1);
    let b2 = isozaki_core::forward::align_bsd(&b1, &full_bsd(&op2)).unwrap();
    let opts = SolverOptions::default();
    let mesh = op1.grid().boundary();

    let p = IsozakiProbe::with_default_direction(&[0.0, 0.0], 12.0).unwrap();
    let lambda = p.lambda(Sign::Plus);
    let mu = C64::new(-100.0, 0.0);
    let a = solve_u(&op1, &p, Sign::Plus, lambda, &opts).unwrap();
    let b = solve_u(&op1, &p, Sign::Plus, mu, &opts).unwrap();
    let direct: Vec<C64> = a.neumann.iter().zip(&b.neumann).map(|(x, y)| x - y).collect();
    let series = series_neumann_diff(&b1, &p, Sign::Plus, lambda, mu, b1.len()).unwrap();
    let err: Vec<C64> = series.iter().zip(&direct).map(|(x, y)| x - y).collect();
    let neumann = mesh.norm2(&err) / mesh.norm2(&direct);

    let mut matches: f64 = 0.0;
    for xi in [[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [2.0, 2.0]] {
        let p = IsozakiProbe::with_default_direction(&xi, 12.0).unwrap();
        let d = isozaki_s(&op1, &p, &opts).unwrap().s - isozaki_s(&op2, &p, &opts).unwrap().s;
        let s = series_s_diff(&b1, &b2, &p, b1.len()).unwrap().total();
        matches = matches.max((s - d).norm() / d.norm());
    }

    let mut hs = Vec::new();
    let mut gaps = Vec::new();
    for n in [15usize, 31, 63] {
        let (op, _) = pair_operators(n);
        let bsd = full_bsd(&op);
        let p = IsozakiProbe::with_default_direction(&[0.0, 0.0], 8.0).unwrap();
        gaps.push(parseval_gap(&op, &p, Sign::Plus, p.lambda(Sign::Plus), &bsd, &opts).unwrap().relative_gap());
        hs.push(op.grid().h());
    }
    let s = slope(&hs, &gaps);
    verdict(
        6,
        "series identities",
        neumann <= 0.01 && matches <= 0.02 && s >= 0.8,
        format!(
            "neumann identity {neumann:.3e} (≤ 0.01), series vs direct {matches:.3e} (≤ 0.02), \
             Parseval gaps {gaps:.4?} slope {s:.3} (≥ 0.8)"
        ),
    );
}

#[test]
fn criterion_07_trace_bound() {
    let _guard = serial();
    let (op, pairs) = free_pairs();
    let bsd = Bsd::from_pairs(op, pairs, TraceStencil::TwoPoint);
    let ratio = trace_growth_ratio(&bsd, 200);
    verdict(
        7,
        "trace bound",
        ratio <= 3.0,
        format!("max/median of ||ψ_k|| / (1 + |λ_k|), k ≤ 200: {ratio:.4} (≤ 3)"),
    );
}

#[test]
fn criterion_08_flattening() {
    let _guard = serial();
    let (op1, op2) = pair_operators(63);
    let p = IsozakiProbe::with_default_direction(&[0.0, 0.0], 2.0).unwrap();
    let rows = neumann_flattening(&op1, &op2, &p, &[-10.0, -1000.0], &SolverOptions::default()).unwrap();
    let ratio = rows[1].norm / rows[0].norm;
    verdict(
        8,
        "flattening",
        ratio <= 0.2,
        format!("norm at μ=-1000 {:.4e} over μ=-10 {:.4e}: {ratio:.4e} (≤ 0.2)", rows[1].norm, rows[0].norm),
    );
}

#[test]
fn criterion_09_constant_shift() {
    let _guard = serial();
    let eps = 1e-2;
    let g = make_grid(2, 1.0, 63).unwrap();
    let op = DiscreteOperator::from_spec(&g, &PotentialSpec::bump(1.0, &[0.45, 0.55], 0.15)).unwrap();
    let b1 = full_bsd(&op);
    let b2 = b1.shifted(eps);
    let lambda = estimate_lambda(&b1, &b2, None).unwrap().value;
    let sums_zero = hypothesis_sum(&b1, &b2).unwrap().iter().all(|v| *v == 0.0);
    let source = SampleSource::Series {
        bsd1: &b1,
        bsd2: &b2,
        count: b1.len(),
    };
    let lattice = FrequencyLattice::for_box(2, 1.0, 10.0);
    let sampling = SamplingOptions {
        tau: TauPolicy::Fixed { tau: 10.0 },
        extrapolation_order: Some(1.0),
    };
    let samples = fourier_sample(&source, &lattice, &sampling).unwrap();
    let r = choose_cutoff(lambda, 1.0, 4.0, samples.radius).unwrap().min(samples.radius);
    let field = invert(&samples, r, &g).unwrap().field;
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let (lo, hi) = field.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    let spread = (hi - lo) / mean.abs();
    let mean_err = (mean + eps).abs() / eps;
    verdict(
        9,
        "constant shift end to end",
        (lambda - eps).abs() <= 1e-10 && sums_zero && spread <= 0.05 && mean_err <= 0.10,
        format!(
            "|Λ - ε| = {:.2e} (≤ 1e-10), hypothesis sums zero: {sums_zero}, cutoff {r:.3}, \
             spread {spread:.4} (≤ 0.05), mean {mean:.6e} off by {mean_err:.4} (≤ 0.10)",
            (lambda - eps).abs()
        ),
    );
}

fn family_config(perturbation: PotentialSpec) -> SweepConfig {
    let text = r#"
        amplitudes = [0.001, 0.01, 0.1]
        [grid]
        dim = 2
        side = 1.0
        n = 31
        [base]
        kind = "gaussian-bump"
        amplitude = 1.0
        center = [0.45, 0.55]
        width = 0.15
        [perturbation]
        kind = "constant"
        value = 1.0
    "#;
    let mut cfg: SweepConfig = toml::from_str(text).unwrap();
    cfg.perturbation = perturbation;
    cfg
}

fn families() -> Vec<(&'static str, PotentialSpec)> {
    vec![
        ("constant", PotentialSpec::Constant { value: 1.0 }),
        (
            "trig",
            PotentialSpec::TrigPolynomial {
                terms: vec![TrigTerm {
                    amplitude: 1.0,
                    indices: vec![1, 1],
                    basis: TrigBasis::Sine,
                }],
            },
        ),
        ("bump", PotentialSpec::bump(1.0, &[0.5, 0.5], 0.2)),
    ]
}

fn synthetic_rows(dim: usize) -> Vec<SweepRow> {
    [1e-4, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&l: &f64| SweepRow {
            dim,
            eps: l,
            lambda: l,
            hypothesis_tail: 0.0,
            cutoff: 1.0,
            hm1_true: l.powf(1.0 / (dim as f64 + 2.0)),
            hm1_recon_error: 0.0,
            l2_recon_error: 0.0,
            status: "ok".into(),
        })
        .collect()
}

#[test]
fn criterion_10_stability_sweep() {
    let _guard = serial();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut constants = Vec::new();
    for (name, delta) in families() {
        let report = run_sweep(&family_config(delta)).unwrap();
        let rows = &report.rows;
        let fit = fit_exponent(rows).unwrap();
        let bounded = rows
            .iter()
            .all(|r| r.is_ok() && r.hm1_true <= fit.c_fit * r.lambda.powf(0.25) * (1.0 + 1e-12));
        ok &= bounded && fit.c_fit.is_finite() && rows.len() == 3;
        constants.push(fit.c_fit);
        lines.push(format!(
            "{name}: Λ = {:.4?}, C_fit = {:.4e}, slope {:.4}, rows bounded: {bounded}",
            rows.iter().map(|r| r.lambda).collect::<Vec<_>>(),
            fit.c_fit,
            fit.slope
        ));
    }
    let spread = constants.iter().copied().fold(0.0, f64::max) / constants.iter().copied().fold(f64::MAX, f64::min);
    let s2 = fit_exponent(&synthetic_rows(2)).unwrap().slope;
    let s3 = fit_exponent(&synthetic_rows(3)).unwrap().slope;
    let exact = (s2 - 0.25).abs() <= 1e-12 && (s3 - 0.2).abs() <= 1e-12;
    ok &= spread <= 10.0 && exact;
    lines.push(format!(
        "C_fit spread {spread:.3} (≤ 10); synthetic slopes d=2 {s2:.15} d=3 {s3:.15}"
    ));
    verdict(10, "stability sweep", ok, lines.join("; "));
}

fn csv_bytes(cfg: &SweepConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let report = pool.install(|| run_sweep(cfg)).unwrap();
    let mut out = Vec::new();
    write_rows_csv(&mut out, &report.rows).unwrap();
    out
}

#[test]
fn criterion_11_determinism() {
    let _guard = serial();
    let mut cfg = family_config(PotentialSpec::bump(1.0, &[0.5, 0.5], 0.2));
    cfg.grid.n = 15;
    cfg.count = 30;
    cfg.dense_limit = 0;
    cfg.seed = 7;
    let a = csv_bytes(&cfg, 1);
    let b = csv_bytes(&cfg, 1);
    let c = csv_bytes(&cfg, 4);
    let constant = family_config(PotentialSpec::Constant { value: 1.0 });
    let d = csv_bytes(&constant, 1);
    let e = csv_bytes(&constant, 3);
    verdict(
        11,
        "determinism",
        a == b && a == c && d == e,
        format!(
            "iterative eigensolver sweep: repeat identical {}, 1 vs 4 workers identical {}; \
             dense sweep 1 vs 3 workers identical {}",
            a == b,
            a == c,
            d == e
        ),
    );
}
