//! The stability sweep: one experiment per amplitude `ε` with `q2 = q1 + ε δq`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::experiments::config::SweepConfig;
use crate::forward::{align_bsd, make_bsd, Bsd, DiscreteOperator, EigenSolverOptions};
use crate::geometry::Grid;
use crate::io::fmt_f64;
use crate::linalg::IterativeEigenOptions;
use crate::potential::sample;
use crate::reconstruct::{
    choose_cutoff, estimate_lambda, fourier_sample, h_minus1_norm, hypothesis_sum, reconstruct,
    FrequencyLattice, FrequencyQuadrature, SampleSource,
};

pub const STATUS_OK: &str = "ok";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    pub eps: f64,
    /// Tail maximum of `|λ_{1,k} - λ_{2,k}|`.
    pub lambda: f64,
    /// `Σ_{k >= N0} ||ψ_{1,k} - ψ_{2,k}||²`.
    pub hypothesis_tail: f64,
    pub cutoff: f64,
    /// `||q1 - q2||_{H^-1}`.
    pub hm1_true: f64,
    pub hm1_recon_error: f64,
    pub l2_recon_error: f64,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    fn failed(dim: usize, eps: f64, err: &Error) -> Self {
        SweepRow {
            dim,
            eps,
            lambda: f64::NAN,
            hypothesis_tail: f64::NAN,
            cutoff: f64::NAN,
            hm1_true: f64::NAN,
            hm1_recon_error: f64::NAN,
            l2_recon_error: f64::NAN,
            status: format!("error: {err}").replace(['\n', ','], " "),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Seconds per row, kept out of the table so that it stays reproducible.
    pub wall_seconds: Vec<f64>,
}

fn eigen_options(cfg: &SweepConfig) -> EigenSolverOptions {
    EigenSolverOptions {
        dense_limit: cfg.dense_limit,
        stencil: cfg.stencil,
        iterative: IterativeEigenOptions {
            seed: cfg.seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

struct Shared {
    grid: Grid,
    bsd1: Bsd,
    delta: Vec<f64>,
    count: usize,
    quad: FrequencyQuadrature,
    lattice: FrequencyLattice,
    eigen: EigenSolverOptions,
}

fn point(cfg: &SweepConfig, shared: &Shared, eps: f64) -> Result<SweepRow> {
    let q2 = cfg.base.plus(&cfg.perturbation.scaled(eps));
    let bsd2 = match q2.constant_offset_from(&cfg.base) {
        Some(c) => shared.bsd1.shifted(c),
        None => {
            let op2 = DiscreteOperator::from_spec(&shared.grid, &q2)?;
            make_bsd(&op2, shared.count, &shared.eigen)?.0
        }
    };
    let bsd2 = align_bsd(&shared.bsd1, &bsd2)?;
    let lambda = estimate_lambda(&shared.bsd1, &bsd2, cfg.tail_start)?;
    let sums = hypothesis_sum(&shared.bsd1, &bsd2)?;
    let before = if lambda.tail_start == 0 { 0.0 } else { sums[lambda.tail_start - 1] };
    let hypothesis_tail = sums[sums.len() - 1] - before;
    let source = SampleSource::Series {
        bsd1: &shared.bsd1,
        bsd2: &bsd2,
        count: shared.count,
    };
    let samples = fourier_sample(&source, &shared.lattice, &cfg.sampling)?;
    let cutoff = choose_cutoff(lambda.value, cfg.cutoff.calibration, cfg.denominator(), cfg.lattice_radius)?
        .min(cfg.lattice_radius);
    let truth: Vec<f64> = shared.delta.iter().map(|d| -eps * d).collect();
    let rec = reconstruct(&samples, lambda.value, cutoff, &shared.grid, Some(&truth), &shared.quad)?;
    let hm1_true = h_minus1_norm(&truth, &shared.grid, &shared.quad)?.value;
    Ok(SweepRow {
        dim: cfg.grid.dim,
        eps,
        lambda: lambda.value,
        hypothesis_tail,
        cutoff,
        hm1_true,
        hm1_recon_error: rec.h_minus1_error.unwrap_or(f64::NAN),
        l2_recon_error: rec.l2_error.unwrap_or(f64::NAN),
        status: STATUS_OK.into(),
    })
}

/// Runs every amplitude in parallel and returns rows in amplitude order.
/// A failing point is recorded in its row and does not stop the others.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid)?;
    let count = cfg.resolved_count();
    let eigen = eigen_options(cfg);
    let op1 = DiscreteOperator::from_spec(&grid, &cfg.base)?;
    let (bsd1, _) = make_bsd(&op1, count, &eigen)?;
    drop(op1);
    let delta = sample(&cfg.perturbation, &grid)?.values;
    let shared = Shared {
        quad: FrequencyQuadrature::default_for(&cfg.grid),
        lattice: FrequencyLattice::for_box(cfg.grid.dim, cfg.grid.side, cfg.lattice_radius),
        grid,
        bsd1,
        delta,
        count,
        eigen,
    };
    let results: Vec<(SweepRow, f64)> = cfg
        .amplitudes
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let row = point(cfg, &shared, eps).unwrap_or_else(|e| SweepRow::failed(cfg.grid.dim, eps, &e));
            (row, start.elapsed().as_secs_f64())
        })
        .collect();
    let (rows, wall_seconds) = results.into_iter().unzip();
    Ok(SweepReport { rows, wall_seconds })
}

const HEADER: [&str; 9] = [
    "dim",
    "eps",
    "lambda",
    "hypothesis_tail",
    "cutoff",
    "hm1_true",
    "hm1_recon_error",
    "l2_recon_error",
    "status",
];

pub fn write_rows_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.dim.to_string(),
            fmt_f64(r.eps),
            fmt_f64(r.lambda),
            fmt_f64(r.hypothesis_tail),
            fmt_f64(r.cutoff),
            fmt_f64(r.hm1_true),
            fmt_f64(r.hm1_recon_error),
            fmt_f64(r.l2_recon_error),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Format(format!("unexpected sweep header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
