//! Run configurations. Files ending in `.json` are read as JSON, anything else as TOML.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::TraceStencil;
use crate::geometry::GridSpec;
use crate::potential::PotentialSpec;
use crate::reconstruct::SamplingOptions;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn default_grid() -> GridSpec {
    GridSpec {
        dim: 2,
        side: 1.0,
        n: 63,
    }
}

fn default_dense_limit() -> usize {
    6000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    /// Number of eigenpairs; `0` means the full discrete spectrum.
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub stencil: TraceStencil,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let total = self.grid.n.pow(self.grid.dim as u32);
        if self.count > total {
            return Err(Error::TooManyEigenpairs {
                requested: self.count,
                available: total,
            });
        }
        Ok(())
    }

    pub fn resolved_count(&self) -> usize {
        if self.count == 0 {
            self.grid.n.pow(self.grid.dim as u32)
        } else {
            self.count
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    #[default]
    All,
    Probe,
    Scattering,
    Series,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "probe" => Ok(Suite::Probe),
            "scattering" => Ok(Suite::Scattering),
            "series" => Ok(Suite::Series),
            other => Err(Error::InvalidArgument(format!("unknown suite {other:?}"))),
        }
    }

    pub fn includes(&self, other: Suite) -> bool {
        *self == Suite::All || *self == other
    }
}

/// Deliberate defects for checking that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Boundary traces computed with the inward instead of the outward normal.
    FlipTraceSign,
}

fn default_taus() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}

fn default_frequencies() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]]
}

fn default_rate_frequency() -> Vec<f64> {
    vec![2.0, 0.0]
}

fn default_mus() -> Vec<f64> {
    vec![-10.0, -100.0, -1000.0]
}

fn zero() -> PotentialSpec {
    PotentialSpec::zero()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    /// `q1`.
    #[serde(default = "zero")]
    pub potential: PotentialSpec,
    /// `q2` for the pair checks; defaults to `q1`.
    #[serde(default)]
    pub partner: Option<PotentialSpec>,
    #[serde(default)]
    pub suite: Suite,
    /// Geometric τ schedule for rate fits.
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    /// Frequencies for the pairing checks; padded or cut to the grid dimension.
    #[serde(default = "default_frequencies")]
    pub frequencies: Vec<Vec<f64>>,
    /// Frequency for the probe defect rate and the Green identity.
    #[serde(default = "default_rate_frequency")]
    pub rate_frequency: Vec<f64>,
    #[serde(default = "default_mus")]
    pub mus: Vec<f64>,
    #[serde(default)]
    pub stencil: TraceStencil,
    #[serde(default)]
    pub fault: Option<Fault>,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid: default_grid(),
            potential: zero(),
            partner: None,
            suite: Suite::All,
            taus: default_taus(),
            frequencies: default_frequencies(),
            rate_frequency: default_rate_frequency(),
            mus: default_mus(),
            stencil: TraceStencil::default(),
            fault: None,
            dense_limit: default_dense_limit(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.taus.len() < 2 || self.taus.iter().any(|t| !(*t >= 1.0)) {
            return Err(Error::InvalidArgument("need at least two τ values, all >= 1".into()));
        }
        if self.mus.is_empty() || self.mus.iter().any(|m| !(*m < 0.0)) {
            return Err(Error::InvalidArgument("μ values must be negative".into()));
        }
        Ok(())
    }

    pub fn partner(&self) -> &PotentialSpec {
        self.partner.as_ref().unwrap_or(&self.potential)
    }

    pub fn stencil(&self) -> TraceStencil {
        match self.fault {
            Some(Fault::FlipTraceSign) => TraceStencil::InwardTwoPoint,
            None => self.stencil,
        }
    }

    /// Frequencies resized to the grid dimension.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.frequencies.iter().map(|xi| self.fit_dim(xi)).collect()
    }

    pub fn rate_frequency(&self) -> Vec<f64> {
        self.fit_dim(&self.rate_frequency)
    }

    fn fit_dim(&self, xi: &[f64]) -> Vec<f64> {
        let mut v = xi.to_vec();
        v.resize(self.grid.dim, 0.0);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub calibration: f64,
    /// Exponent denominator in `r = calibration * Λ^(-2/denominator)`; defaults to `d + 2`.
    #[serde(default)]
    pub denominator: Option<f64>,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        CutoffConfig {
            calibration: 1.0,
            denominator: None,
        }
    }
}

fn default_amplitudes() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}

fn default_lattice_radius() -> f64 {
    10.0
}

fn default_sampling() -> SamplingOptions {
    SamplingOptions {
        tau: crate::reconstruct::TauPolicy::Fixed { tau: 10.0 },
        extrapolation_order: Some(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    /// `q1`.
    pub base: PotentialSpec,
    /// `δq`; each row uses `q2 = q1 + ε δq`.
    pub perturbation: PotentialSpec,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    /// Number of eigenpairs; `0` means the full discrete spectrum.
    #[serde(default)]
    pub count: usize,
    /// First index of the tail used for Λ; defaults to half the count.
    #[serde(default)]
    pub tail_start: Option<usize>,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingOptions,
    /// Radius of the sampled frequency ball.
    #[serde(default = "default_lattice_radius")]
    pub lattice_radius: f64,
    #[serde(default)]
    pub cutoff: CutoffConfig,
    #[serde(default)]
    pub stencil: TraceStencil,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default)]
    pub seed: u64,
    /// Where the CLI writes the rows when `--out` is not given.
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.amplitudes.is_empty() {
            return Err(Error::InvalidArgument("no amplitudes".into()));
        }
        if self.amplitudes.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument("amplitudes must be positive".into()));
        }
        if self.amplitudes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("amplitudes must be strictly increasing".into()));
        }
        if !(self.lattice_radius > 0.0) {
            return Err(Error::InvalidArgument("lattice radius must be positive".into()));
        }
        if !(self.cutoff.calibration > 0.0) || self.cutoff.denominator.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidArgument("cutoff parameters must be positive".into()));
        }
        let total = self.grid.n.pow(self.grid.dim as u32);
        if self.count > total {
            return Err(Error::TooManyEigenpairs {
                requested: self.count,
                available: total,
            });
        }
        let k = self.resolved_count();
        if self.tail_start.is_some_and(|t| t >= k) {
            return Err(Error::InvalidArgument("tail start must be below the count".into()));
        }
        let g = crate::geometry::Grid::new(self.grid)?;
        crate::potential::sample(&self.base, &g)?;
        crate::potential::sample(&self.perturbation, &g)?;
        Ok(())
    }

    pub fn resolved_count(&self) -> usize {
        if self.count == 0 {
            self.grid.n.pow(self.grid.dim as u32)
        } else {
            self.count
        }
    }

    pub fn denominator(&self) -> f64 {
        self.cutoff.denominator.unwrap_or(self.grid.dim as f64 + 2.0)
    }
}
