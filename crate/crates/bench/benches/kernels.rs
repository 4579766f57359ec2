use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use isozaki_core::forward::{eigs, make_bsd};
use isozaki_core::linalg::FastDirichlet;
use isozaki_core::scattering::{isozaki_s, series_s_diff, SolverKind};
use isozaki_core::{make_grid, DiscreteOperator, EigenSolverOptions, IsozakiProbe, PotentialSpec, SolverOptions, C64};

fn bump() -> PotentialSpec {
    PotentialSpec::bump(1.0, &[0.45, 0.55], 0.15)
}

fn stencil_apply(c: &mut Criterion) {
    let g = make_grid(2, 1.0, 127).unwrap();
    let op = DiscreteOperator::from_spec(&g, &bump()).unwrap();
    let x: Vec<f64> = (0..op.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut y = vec![0.0; op.len()];
    c.bench_function("apply 2d n=127", |b| b.iter(|| op.apply(black_box(&x), &mut y)));
}

fn sine_solve(c: &mut Criterion) {
    let n = 127;
    let fast = FastDirichlet::new(n, 2, 1.0 / (n as f64 + 1.0));
    let rhs: Vec<C64> = (0..n * n).map(|i| C64::new((i as f64 * 0.11).cos(), 0.0)).collect();
    c.bench_function("sine solve 2d n=127", |b| {
        b.iter(|| {
            let mut x = rhs.clone();
            fast.solve(&mut x, C64::new(-50.0, 10.0));
            black_box(x)
        })
    });
}

fn dense_eigs(c: &mut Criterion) {
    let g = make_grid(2, 1.0, 31).unwrap();
    let op = DiscreteOperator::from_spec(&g, &bump()).unwrap();
    let mut group = c.benchmark_group("eigensolvers");
    group.sample_size(10);
    group.bench_function("dense full 2d n=31", |b| {
        b.iter(|| eigs(&op, op.len(), &EigenSolverOptions::default()).unwrap())
    });
    let iterative = EigenSolverOptions {
        dense_limit: 0,
        ..Default::default()
    };
    group.bench_function("iterative 20 pairs 2d n=31", |b| b.iter(|| eigs(&op, 20, &iterative).unwrap()));
    group.finish();
}

fn shifted_solves(c: &mut Criterion) {
    let g = make_grid(2, 1.0, 63).unwrap();
    let op = DiscreteOperator::from_spec(&g, &bump()).unwrap();
    let probe = IsozakiProbe::with_default_direction(&[2.0, 0.0], 16.0).unwrap();
    let mut group = c.benchmark_group("functional");
    group.sample_size(10);
    for (name, kind) in [("direct", SolverKind::Direct), ("iterative", SolverKind::Iterative)] {
        let opts = SolverOptions {
            kind,
            ..Default::default()
        };
        group.bench_function(format!("isozaki_s {name} 2d n=63"), |b| {
            b.iter(|| isozaki_s(&op, &probe, &opts).unwrap())
        });
    }
    group.finish();
}

fn series(c: &mut Criterion) {
    let g = make_grid(2, 1.0, 31).unwrap();
    let op1 = DiscreteOperator::from_spec(&g, &bump()).unwrap();
    let op2 = DiscreteOperator::from_spec(&g, &PotentialSpec::bump(0.7, &[0.4, 0.6], 0.12)).unwrap();
    let (b1, _) = make_bsd(&op1, op1.len(), &EigenSolverOptions::default()).unwrap();
    let (b2, _) = make_bsd(&op2, op2.len(), &EigenSolverOptions::default()).unwrap();
    let probe = IsozakiProbe::with_default_direction(&[2.0, 0.0], 16.0).unwrap();
    c.bench_function("series_s_diff full 2d n=31", |b| {
        b.iter(|| series_s_diff(&b1, &b2, black_box(&probe), b1.len()).unwrap())
    });
}

criterion_group!(benches, stencil_apply, sine_solve, dense_eigs, shifted_solves, series);
criterion_main!(benches);
