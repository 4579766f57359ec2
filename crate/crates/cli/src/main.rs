use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use isozaki_core::experiments::{
    fit_exponent, load, read_rows_csv, run_sweep, run_verify, write_rows_csv, CheckStatus, Fault, ForwardConfig,
    Suite, SweepConfig, VerifyConfig,
};
use isozaki_core::forward::{align_bsd, common_len, make_bsd, Bsd};
use isozaki_core::io::{read_bsd, read_samples_csv, to_json_string, write_bsd, write_json, write_samples_csv};
use isozaki_core::linalg::IterativeEigenOptions;
use isozaki_core::potential::sample;
use isozaki_core::reconstruct::{
    choose_cutoff, estimate_lambda, fourier_sample, reconstruct, FrequencyLattice, FrequencyQuadrature,
    SampleMethod, SampleSource, SamplingOptions, TauPolicy,
};
use isozaki_core::{DiscreteOperator, EigenSolverOptions, Grid, GridSpec, SolverOptions};

#[derive(Parser, Debug)]
#[command(name = "isozaki-kit", version, about = "Boundary spectral data, probes and potential recovery on a box")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute eigenvalues and boundary traces and store them.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run identity and rate suites; exits non-zero when a check fails.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["all", "probe", "scattering", "series"])]
        suite: Option<String>,
        /// Injects a known defect to confirm the suites can fail.
        #[arg(long, value_parser = ["flip-trace-sign"])]
        inject_fault: Option<String>,
        /// Writes the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample the Fourier transform of q1 - q2 on the box lattice.
    Fourier {
        #[arg(long)]
        bsd1: PathBuf,
        #[arg(long)]
        bsd2: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        rmax: f64,
        #[arg(long, default_value = "series", value_parser = ["series", "direct"])]
        method: String,
        /// Extrapolate in τ with this order using samples at τ and 2τ.
        #[arg(long)]
        extrapolate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert Fourier samples with the stability cutoff.
    Reconstruct {
        #[arg(long)]
        samples: PathBuf,
        /// A number, or `auto` to estimate it from --bsd1/--bsd2.
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bsd1: Option<PathBuf>,
        #[arg(long)]
        bsd2: Option<PathBuf>,
        /// Grid points per axis when no data file gives the grid.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        #[arg(long, default_value_t = 1.0)]
        calibration: f64,
        /// Denominator in the cutoff exponent; defaults to d + 2.
        #[arg(long)]
        denominator: Option<f64>,
        #[arg(long)]
        tail_start: Option<usize>,
    },
    /// Run the stability sweep and write one CSV row per amplitude.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the stability exponent to a sweep CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Forward { config, out } => forward(&config, &out, cli.seed).map(|_| true),
        Command::Verify {
            config,
            suite,
            inject_fault,
            report,
        } => verify(config.as_deref(), suite, inject_fault, report.as_deref()),
        Command::Fourier {
            bsd1,
            bsd2,
            tau,
            rmax,
            method,
            extrapolate,
            out,
        } => fourier(&bsd1, &bsd2, tau, rmax, &method, extrapolate, &out).map(|_| true),
        Command::Reconstruct {
            samples,
            lambda,
            out,
            bsd1,
            bsd2,
            n,
            side,
            calibration,
            denominator,
            tail_start,
        } => reconstruct_cmd(ReconstructArgs {
            samples,
            lambda,
            out,
            bsd1,
            bsd2,
            n,
            side,
            calibration,
            denominator,
            tail_start,
        })
        .map(|_| true),
        Command::Sweep { config, out } => sweep(&config, out, cli.seed).map(|_| true),
        Command::Fit { input } => fit(&input).map(|_| true),
    }
}

fn forward(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg: ForwardConfig = load(config).with_context(|| format!("reading {}", config.display()))?;
    cfg.validate()?;
    let start = Instant::now();
    let grid = Grid::new(cfg.grid)?;
    let op = DiscreteOperator::from_spec(&grid, &cfg.potential)?;
    let opts = EigenSolverOptions {
        dense_limit: cfg.dense_limit,
        stencil: cfg.stencil,
        iterative: IterativeEigenOptions {
            seed: seed.or(cfg.seed).unwrap_or(IterativeEigenOptions::default().seed),
            ..Default::default()
        },
        ..Default::default()
    };
    let (bsd, pairs) = make_bsd(&op, cfg.resolved_count(), &opts)?;
    write_bsd(out, &bsd)?;
    eprintln!("forward: {} eigenpairs in {:.3} s", bsd.len(), start.elapsed().as_secs_f64());
    let summary = summary(&bsd, pairs.residuals.iter().copied().fold(0.0, f64::max));
    println!("{}", to_json_string(&summary)?);
    Ok(())
}

fn summary(bsd: &Bsd, max_residual: f64) -> std::collections::BTreeMap<&'static str, f64> {
    let mut m = std::collections::BTreeMap::new();
    m.insert("count", bsd.len() as f64);
    m.insert("lambda_first", bsd.eigenvalues.first().copied().unwrap_or(f64::NAN));
    m.insert("lambda_last", bsd.eigenvalues.last().copied().unwrap_or(f64::NAN));
    m.insert("max_residual", max_residual);
    m
}

fn verify(config: Option<&Path>, suite: Option<String>, fault: Option<String>, report: Option<&Path>) -> Result<bool> {
    let mut cfg: VerifyConfig = match config {
        Some(p) => load(p).with_context(|| format!("reading {}", p.display()))?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = suite {
        cfg.suite = Suite::parse(&s)?;
    }
    if fault.is_some() {
        cfg.fault = Some(Fault::FlipTraceSign);
    }
    let start = Instant::now();
    let rep = run_verify(&cfg)?;
    for c in &rep.checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
            CheckStatus::Error => "ERROR",
        };
        let measured = c.measured.map(isozaki_core::io::fmt_f64).unwrap_or_else(|| "-".into());
        let band = if c.chosen_band { " (chosen band)" } else { "" };
        println!("{tag} {} measured={measured} {}{band} {}", c.name, c.condition, c.detail);
    }
    eprintln!("verify: {} checks in {:.3} s", rep.checks.len(), start.elapsed().as_secs_f64());
    if let Some(p) = report {
        write_json(p, &rep)?;
    }
    Ok(rep.passed())
}

fn operator_from(bsd: &Bsd) -> Result<DiscreteOperator> {
    let spec = bsd
        .meta
        .potential
        .as_ref()
        .ok_or_else(|| anyhow!("the direct method needs the potential recorded in the sidecar"))?;
    Ok(DiscreteOperator::from_spec(&Grid::new(bsd.grid)?, spec)?)
}

fn read_pair(a: &Path, b: &Path) -> Result<(Bsd, Bsd)> {
    let bsd1 = read_bsd(a).with_context(|| format!("reading {}", a.display()))?;
    let bsd2 = read_bsd(b).with_context(|| format!("reading {}", b.display()))?;
    let k = common_len(&bsd1, &bsd2)?;
    let bsd1 = bsd1.truncated(k);
    let bsd2 = align_bsd(&bsd1, &bsd2.truncated(k))?;
    Ok((bsd1, bsd2))
}

fn fourier(
    a: &Path,
    b: &Path,
    tau: f64,
    rmax: f64,
    method: &str,
    extrapolate: Option<f64>,
    out: &Path,
) -> Result<()> {
    let (bsd1, bsd2) = read_pair(a, b)?;
    let lattice = FrequencyLattice::for_box(bsd1.grid.dim, bsd1.grid.side, rmax);
    let opts = SamplingOptions {
        tau: TauPolicy::Fixed { tau },
        extrapolation_order: extrapolate,
    };
    let start = Instant::now();
    let samples = match SampleMethod::parse(method)? {
        SampleMethod::Series => {
            let source = SampleSource::Series {
                bsd1: &bsd1,
                bsd2: &bsd2,
                count: bsd1.len(),
            };
            fourier_sample(&source, &lattice, &opts)?
        }
        SampleMethod::Direct => {
            let (op1, op2) = (operator_from(&bsd1)?, operator_from(&bsd2)?);
            let source = SampleSource::Direct {
                op1: &op1,
                op2: &op2,
                solver: SolverOptions {
                    stencil: bsd1.meta.stencil,
                    ..Default::default()
                },
            };
            fourier_sample(&source, &lattice, &opts)?
        }
    };
    write_samples_csv(BufWriter::new(File::create(out)?), &samples)?;
    eprintln!(
        "fourier: {} samples in {:.3} s",
        samples.samples.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

struct ReconstructArgs {
    samples: PathBuf,
    lambda: String,
    out: PathBuf,
    bsd1: Option<PathBuf>,
    bsd2: Option<PathBuf>,
    n: Option<usize>,
    side: f64,
    calibration: f64,
    denominator: Option<f64>,
    tail_start: Option<usize>,
}

fn reconstruct_cmd(args: ReconstructArgs) -> Result<()> {
    let samples = read_samples_csv(BufReader::new(File::open(&args.samples)?))
        .with_context(|| format!("reading {}", args.samples.display()))?;
    let pair = match (&args.bsd1, &args.bsd2) {
        (Some(a), Some(b)) => Some(read_pair(a, b)?),
        (None, None) => None,
        _ => bail!("--bsd1 and --bsd2 must be given together"),
    };
    let lambda = if args.lambda == "auto" {
        let (b1, b2) = pair
            .as_ref()
            .ok_or_else(|| anyhow!("--lambda auto needs --bsd1 and --bsd2"))?;
        estimate_lambda(b1, b2, args.tail_start)?.value
    } else {
        args.lambda
            .parse::<f64>()
            .map_err(|e| anyhow!("--lambda must be a number or auto: {e}"))?
    };
    let spec = match (&pair, args.n) {
        (Some((b1, _)), _) => b1.grid,
        (None, Some(n)) => GridSpec {
            dim: samples.dim,
            side: args.side,
            n,
        },
        (None, None) => bail!("give --n or a data pair to fix the output grid"),
    };
    if spec.dim != samples.dim {
        bail!("sample dimension {} does not match the grid dimension {}", samples.dim, spec.dim);
    }
    let grid = Grid::new(spec)?;
    let denominator = args.denominator.unwrap_or(spec.dim as f64 + 2.0);
    let r = choose_cutoff(lambda, args.calibration, denominator, samples.radius)?.min(samples.radius);
    let truth = match &pair {
        Some((b1, b2)) => match (&b1.meta.potential, &b2.meta.potential) {
            (Some(p1), Some(p2)) => {
                let q1 = sample(p1, &grid)?.values;
                let q2 = sample(p2, &grid)?.values;
                Some(q1.iter().zip(&q2).map(|(a, b)| a - b).collect::<Vec<f64>>())
            }
            _ => None,
        },
        None => None,
    };
    let quad = FrequencyQuadrature::default_for(&spec);
    let result = reconstruct(&samples, lambda, r, &grid, truth.as_deref(), &quad)?;
    write_json(&args.out, &result)?;
    eprintln!("reconstruct: cutoff {r} with {} modes", result.modes);
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg: SweepConfig = load(config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| anyhow!("give --out or set `output` in the configuration"))?;
    let start = Instant::now();
    let report = run_sweep(&cfg)?;
    write_rows_csv(BufWriter::new(File::create(&out)?), &report.rows)?;
    for (row, t) in report.rows.iter().zip(&report.wall_seconds) {
        eprintln!("sweep: ε = {:e} took {t:.3} s ({})", row.eps, row.status);
    }
    eprintln!("sweep: total {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn fit(input: &Path) -> Result<()> {
    let rows = read_rows_csv(BufReader::new(File::open(input)?)).with_context(|| format!("reading {}", input.display()))?;
    let fit = fit_exponent(&rows)?;
    println!("{}", to_json_string(&fit)?);
    Ok(())
}
