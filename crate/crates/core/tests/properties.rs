use std::sync::OnceLock;

use proptest::prelude::*;

use isozaki_core::experiments::{fit_exponent, SweepRow};
use isozaki_core::forward::make_bsd;
use isozaki_core::io::{fmt_f64, read_bsd, write_bsd};
use isozaki_core::probe::product_defect;
use isozaki_core::reconstruct::{
    choose_cutoff, estimate_lambda, fourier_sample, hypothesis_sum, FrequencyLattice, SampleSource, SamplingOptions,
};
use isozaki_core::scattering::series_s_diff;
use isozaki_core::{
    make_grid, Bsd, DiscreteOperator, EigenSolverOptions, IsozakiProbe, PotentialSpec, Sign, TauPolicy, C64,
};

fn small_bsd() -> &'static Bsd {
    static CELL: OnceLock<Bsd> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = make_grid(2, 1.0, 9).unwrap();
        let op = DiscreteOperator::from_spec(&g, &PotentialSpec::bump(1.0, &[0.45, 0.55], 0.2)).unwrap();
        make_bsd(&op, op.len(), &EigenSolverOptions::default()).unwrap().0
    })
}

fn frequency(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-12.0f64..12.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probe_directions_are_unit_and_split_xi(xi in frequency(3), extra in 0.0f64..200.0) {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tau = norm.max(1.0) + extra;
        let p = IsozakiProbe::with_default_direction(&xi, tau).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let n = p.direction(sign).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-14);
        }
        let (minus, plus) = (p.direction(Sign::Minus), p.direction(Sign::Plus));
        for ((m, q), x) in minus.iter().zip(plus).zip(&xi) {
            prop_assert!((m - q - x / tau).abs() <= 1e-14 * (1.0 + x.abs()));
        }
        let (kp, km) = (C64::new(tau, 1.0), C64::new(tau, -1.0));
        prop_assert_eq!(p.lambda(Sign::Plus), kp * kp);
        prop_assert_eq!(p.lambda(Sign::Minus), km * km);
    }

    #[test]
    fn product_defect_shrinks_as_tau_grows(xi in frequency(2), tau in 16.0f64..64.0) {
        let g = make_grid(2, 1.0, 7).unwrap();
        let a = product_defect(&IsozakiProbe::with_default_direction(&xi, tau).unwrap(), &g);
        let b = product_defect(&IsozakiProbe::with_default_direction(&xi, 4.0 * tau).unwrap(), &g);
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn identical_data_has_zero_series(xi in frequency(2), tau in 12.0f64..40.0, k in 1usize..=81) {
        let b = small_bsd();
        let p = IsozakiProbe::with_default_direction(&xi, tau).unwrap();
        prop_assert_eq!(series_s_diff(b, b, &p, k).unwrap().total(), C64::new(0.0, 0.0));
    }

    #[test]
    fn constant_shift_gives_exact_lambda_and_zero_hypothesis(c in -5.0f64..5.0) {
        let b = small_bsd();
        let s = b.shifted(c);
        let e = estimate_lambda(b, &s, None).unwrap().value;
        prop_assert!((e - c.abs()).abs() <= 1e-12 * (1.0 + b.eigenvalues[80]));
        prop_assert!(hypothesis_sum(b, &s).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn halving_the_shift_never_increases_lambda(eps in 1e-6f64..1.0) {
        let b = small_bsd();
        let big = estimate_lambda(b, &b.shifted(eps), None).unwrap().value;
        let small = estimate_lambda(b, &b.shifted(eps / 2.0), None).unwrap().value;
        prop_assert!(small <= big);
    }

    #[test]
    fn series_is_antisymmetric_in_the_pair(xi in frequency(2), eps in 1e-4f64..1e-1) {
        let b = small_bsd();
        let s = b.shifted(eps);
        let p = IsozakiProbe::with_default_direction(&xi, 20.0).unwrap();
        let ab = series_s_diff(b, &s, &p, b.len()).unwrap().total();
        let ba = series_s_diff(&s, b, &p, b.len()).unwrap().total();
        prop_assert!((ab + ba).norm() <= 1e-12 * ab.norm().max(1e-300));
    }

    #[test]
    fn cutoff_decreases_with_lambda(l in 1e-8f64..1.0, f in 1.01f64..100.0, d in 2usize..=3) {
        let den = d as f64 + 2.0;
        let a = choose_cutoff(l, 1.0, den, f64::INFINITY).unwrap();
        let b = choose_cutoff(l * f, 1.0, den, f64::INFINITY).unwrap();
        prop_assert!(b < a);
        prop_assert!((a * l.powf(2.0 / den) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn formatted_floats_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let text = fmt_f64(x);
        prop_assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn sampling_is_linear_in_the_spec(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -2.0f64..2.0) {
        let g = make_grid(2, 1.0, 7).unwrap();
        let p = PotentialSpec::bump(1.0, &[0.3, 0.6], 0.2);
        let q = PotentialSpec::Constant { value: c };
        let combo = p.scaled(a).plus(&q.scaled(b));
        let lhs = isozaki_core::potential::sample(&combo, &g).unwrap().values;
        let pv = isozaki_core::potential::sample(&p, &g).unwrap().values;
        for (i, v) in lhs.iter().enumerate() {
            prop_assert!((v - (a * pv[i] + b * c)).abs() <= 1e-13 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn fit_recovers_any_power_law(c in 0.1f64..10.0, d in 2usize..=3) {
        let e = 1.0 / (d as f64 + 2.0);
        let rows: Vec<SweepRow> = [1e-5, 1e-3, 1e-1]
            .iter()
            .map(|&l: &f64| SweepRow {
                dim: d,
                eps: l,
                lambda: l,
                hypothesis_tail: 0.0,
                cutoff: 1.0,
                hm1_true: c * l.powf(e),
                hm1_recon_error: 0.0,
                l2_recon_error: 0.0,
                status: "ok".into(),
            })
            .collect();
        let fit = fit_exponent(&rows).unwrap();
        prop_assert!((fit.slope - e).abs() <= 1e-10);
        prop_assert!((fit.c_fit - c).abs() <= 1e-10 * c);
    }
}

#[test]
fn samples_are_exactly_hermitian() {
    let b = small_bsd();
    let s = b.shifted(0.01);
    let source = SampleSource::Series {
        bsd1: b,
        bsd2: &s,
        count: b.len(),
    };
    let opts = SamplingOptions {
        tau: TauPolicy::Fixed { tau: 20.0 },
        extrapolation_order: None,
    };
    let samples = fourier_sample(&source, &FrequencyLattice::for_box(2, 1.0, 14.0), &opts).unwrap();
    assert_eq!(samples.hermitian_defect(), 0.0);
    assert!(samples.samples.len() > 9);
}

#[test]
fn bsd_files_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bsd");
    let b = small_bsd();
    write_bsd(&path, b).unwrap();
    let back = read_bsd(&path).unwrap();
    assert_eq!(&back, b);
}
