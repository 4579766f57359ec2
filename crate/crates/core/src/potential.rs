//! Potential specifications, their grid samples, and the admissibility check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrigBasis {
    Sine,
    Cosine,
}

/// `amplitude * prod_a basis(indices[a] * pi * x_a / L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub indices: Vec<u32>,
    #[serde(default = "default_basis")]
    pub basis: TrigBasis,
}

fn default_basis() -> TrigBasis {
    TrigBasis::Sine
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Constant {
        value: f64,
    },
    TrigPolynomial {
        terms: Vec<TrigTerm>,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `amplitude * |x - center|^(-exponent)`.
    InversePower {
        amplitude: f64,
        center: Vec<f64>,
        exponent: f64,
    },
    /// Sine polynomial with seeded coefficients decaying like `|m|^-2`.
    RandomTrig {
        seed: u64,
        max_index: u32,
        amplitude: f64,
    },
    Sum {
        parts: Vec<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Constant { value: 0.0 }
    }

    pub fn bump(amplitude: f64, center: &[f64], width: f64) -> Self {
        PotentialSpec::GaussianBump {
            amplitude,
            center: center.to_vec(),
            width,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        use PotentialSpec::*;
        match self {
            Constant { value } => Constant {
                value: value * factor,
            },
            TrigPolynomial { terms } => TrigPolynomial {
                terms: terms
                    .iter()
                    .map(|t| TrigTerm {
                        amplitude: t.amplitude * factor,
                        ..t.clone()
                    })
                    .collect(),
            },
            GaussianBump {
                amplitude,
                center,
                width,
            } => GaussianBump {
                amplitude: amplitude * factor,
                center: center.clone(),
                width: *width,
            },
            InversePower {
                amplitude,
                center,
                exponent,
            } => InversePower {
                amplitude: amplitude * factor,
                center: center.clone(),
                exponent: *exponent,
            },
            RandomTrig {
                seed,
                max_index,
                amplitude,
            } => RandomTrig {
                seed: *seed,
                max_index: *max_index,
                amplitude: amplitude * factor,
            },
            Sum { parts } => Sum {
                parts: parts.iter().map(|p| p.scaled(factor)).collect(),
            },
        }
    }

    pub fn plus(&self, other: &PotentialSpec) -> Self {
        PotentialSpec::Sum {
            parts: vec![self.clone(), other.clone()],
        }
    }

    /// The constant value if the potential is constant by construction.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            PotentialSpec::Constant { value } => Some(*value),
            PotentialSpec::Sum { parts } => parts
                .iter()
                .map(|p| p.as_constant())
                .try_fold(0.0, |acc, c| c.map(|c| acc + c)),
            _ => None,
        }
    }

    /// Splits off a constant part: `self = constant + rest` if possible.
    pub fn constant_offset_from(&self, base: &PotentialSpec) -> Option<f64> {
        if self == base {
            return Some(0.0);
        }
        if let PotentialSpec::Sum { parts } = self {
            if parts.len() >= 2 && &parts[0] == base {
                return parts[1..]
                    .iter()
                    .map(|p| p.as_constant())
                    .try_fold(0.0, |acc, c| c.map(|c| acc + c));
            }
        }
        None
    }

    fn validate(&self, dim: usize) -> Result<()> {
        use PotentialSpec::*;
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPotential(format!("{what} must be finite")))
            }
        };
        match self {
            Constant { value } => finite(*value, "value"),
            TrigPolynomial { terms } => {
                for t in terms {
                    finite(t.amplitude, "amplitude")?;
                    if t.indices.len() != dim {
                        return Err(Error::InvalidPotential(format!(
                            "trig term needs {dim} indices, got {}",
                            t.indices.len()
                        )));
                    }
                }
                Ok(())
            }
            GaussianBump {
                amplitude,
                center,
                width,
            } => {
                finite(*amplitude, "amplitude")?;
                check_center(center, dim)?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidPotential("width must be positive".into()));
                }
                Ok(())
            }
            InversePower {
                amplitude,
                center,
                exponent,
            } => {
                finite(*amplitude, "amplitude")?;
                check_center(center, dim)?;
                let limit = dim as f64 / admissible_exponent(dim);
                if !(*exponent > 0.0 && *exponent < limit) {
                    return Err(Error::InvalidPotential(format!(
                        "inverse-power exponent must lie in (0, {limit}), got {exponent}"
                    )));
                }
                Ok(())
            }
            RandomTrig { amplitude, .. } => finite(*amplitude, "amplitude"),
            Sum { parts } => parts.iter().try_for_each(|p| p.validate(dim)),
        }
    }
}

fn check_center(center: &[f64], dim: usize) -> Result<()> {
    if center.len() != dim {
        return Err(Error::InvalidPotential(format!(
            "center needs {dim} coordinates, got {}",
            center.len()
        )));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidPotential("center must be finite".into()));
    }
    Ok(())
}

/// Integrability exponent `max(2, 3d/5)` of the admissible class.
pub fn admissible_exponent(dim: usize) -> f64 {
    f64::max(2.0, 3.0 * dim as f64 / 5.0)
}

/// Moves a point to the nearest grid node plus `h/3` along every axis.
pub fn snap_center(grid: &Grid, center: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let n = grid.n() as f64;
    center
        .iter()
        .map(|&c| {
            let i = (c / h).round().clamp(1.0, n);
            i * h + h / 3.0
        })
        .collect()
}

fn coincides_with_node(grid: &Grid, center: &[f64]) -> bool {
    let h = grid.h();
    let n = grid.n() as f64;
    center.iter().all(|&c| {
        let t = c / h;
        let r = t.round();
        (t - r).abs() < 1e-9 && r >= 1.0 && r <= n
    })
}

#[derive(Clone, Debug)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Grid `L^p` norm with `p` the admissible exponent.
    pub norm: f64,
    pub exponent: f64,
}

impl PotentialField {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let p = admissible_exponent(grid.dim());
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
        let norm = (sum * grid.cell_volume()).powf(1.0 / p);
        Ok(PotentialField {
            values,
            min,
            max,
            norm,
            exponent: p,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Samples the potential at the interior nodes.
pub fn sample(spec: &PotentialSpec, grid: &Grid) -> Result<PotentialField> {
    spec.validate(grid.dim())?;
    check_singular_centers(spec, grid)?;
    let coefficients = random_coefficients(spec, grid.dim());
    let values = grid.sample(|x| evaluate(spec, x, grid.dim(), grid.side(), &coefficients));
    PotentialField::from_values(grid, values)
}

fn check_singular_centers(spec: &PotentialSpec, grid: &Grid) -> Result<()> {
    match spec {
        PotentialSpec::InversePower { center, .. } if coincides_with_node(grid, center) => {
            Err(Error::SingularCenter {
                center: center.clone(),
            })
        }
        PotentialSpec::Sum { parts } => parts.iter().try_for_each(|p| check_singular_centers(p, grid)),
        _ => Ok(()),
    }
}

type Coefficients = Vec<Vec<(Vec<u32>, f64)>>;

fn random_coefficients(spec: &PotentialSpec, dim: usize) -> Coefficients {
    let mut out = Vec::new();
    collect_random(spec, dim, &mut out);
    out
}

fn collect_random(spec: &PotentialSpec, dim: usize, out: &mut Coefficients) {
    match spec {
        PotentialSpec::RandomTrig {
            seed,
            max_index,
            amplitude,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let m = *max_index as usize;
            let count = m.pow(dim as u32);
            let mut terms = Vec::with_capacity(count);
            for t in 0..count {
                let mut idx = vec![0u32; dim];
                let mut rem = t;
                for a in (0..dim).rev() {
                    idx[a] = (rem % m) as u32 + 1;
                    rem /= m;
                }
                let size: f64 = idx.iter().map(|&i| (i * i) as f64).sum();
                let c: f64 = rng.random_range(-1.0..1.0);
                terms.push((idx, amplitude * c / size));
            }
            out.push(terms);
        }
        PotentialSpec::Sum { parts } => {
            for p in parts {
                collect_random(p, dim, out);
            }
        }
        _ => {}
    }
}

fn evaluate(spec: &PotentialSpec, x: &Point, dim: usize, side: f64, random: &Coefficients) -> f64 {
    let mut cursor = 0;
    eval_inner(spec, x, dim, side, random, &mut cursor)
}

fn eval_inner(
    spec: &PotentialSpec,
    x: &Point,
    dim: usize,
    side: f64,
    random: &Coefficients,
    cursor: &mut usize,
) -> f64 {
    use PotentialSpec::*;
    let trig = |amplitude: f64, indices: &[u32], basis: TrigBasis| -> f64 {
        let mut v = amplitude;
        for a in 0..dim {
            let arg = indices[a] as f64 * PI * x[a] / side;
            v *= match basis {
                TrigBasis::Sine => arg.sin(),
                TrigBasis::Cosine => arg.cos(),
            };
        }
        v
    };
    match spec {
        Constant { value } => *value,
        TrigPolynomial { terms } => terms
            .iter()
            .map(|t| trig(t.amplitude, &t.indices, t.basis))
            .sum(),
        GaussianBump {
            amplitude,
            center,
            width,
        } => {
            let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        }
        InversePower {
            amplitude,
            center,
            exponent,
        } => {
            let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
            amplitude * r2.powf(-exponent / 2.0)
        }
        RandomTrig { .. } => {
            let terms = &random[*cursor];
            *cursor += 1;
            terms
                .iter()
                .map(|(idx, c)| trig(*c, idx, TrigBasis::Sine))
                .sum()
        }
        Sum { parts } => parts
            .iter()
            .map(|p| eval_inner(p, x, dim, side, random, cursor))
            .sum(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub exponent: f64,
    pub norm: f64,
    pub min: f64,
    pub lower_bound: f64,
    pub norm_bound: f64,
    pub bounded_below: bool,
    pub norm_within: bool,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.bounded_below && self.norm_within
    }
}

/// Checks `q >= -c0` pointwise and `||q||_{L^p} <= m`.
pub fn class_check(field: &PotentialField, c0: f64, m: f64) -> AdmissibilityReport {
    AdmissibilityReport {
        exponent: field.exponent,
        norm: field.norm,
        min: field.min,
        lower_bound: c0,
        norm_bound: m,
        bounded_below: field.min >= -c0,
        norm_within: field.norm <= m,
    }
}
