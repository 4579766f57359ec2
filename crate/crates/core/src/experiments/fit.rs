//! Rate fits on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::sweep::SweepRow;

/// Least-squares slope and intercept of `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Degenerate("need at least two points for a fit".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Slope of `log y` against `log x`; every value must be positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Slope of `log ||q1 - q2||_{H^-1}` against `log Λ`.
    pub slope: f64,
    pub intercept: f64,
    /// The stability exponent `1 / (d + 2)`.
    pub exponent: f64,
    /// `max_i ||q1 - q2||_{H^-1} / Λ_i^{1/(d+2)}`.
    pub c_fit: f64,
    pub rows: usize,
}

/// Fits the stability exponent over rows that finished with `Λ > 0`.
pub fn fit_exponent(rows: &[SweepRow]) -> Result<ExponentFit> {
    let used: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.is_ok() && r.lambda > 0.0 && r.hm1_true > 0.0)
        .collect();
    if used.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 rows with Λ > 0, got {}",
            used.len()
        )));
    }
    let dim = used[0].dim;
    if used.iter().any(|r| r.dim != dim) {
        return Err(Error::Incompatible("rows mix dimensions".into()));
    }
    if used.iter().all(|r| r.lambda == used[0].lambda) {
        return Err(Error::Degenerate("all Λ values are equal".into()));
    }
    let exponent = 1.0 / (dim as f64 + 2.0);
    let x: Vec<f64> = used.iter().map(|r| r.lambda.ln()).collect();
    let y: Vec<f64> = used.iter().map(|r| r.hm1_true.ln()).collect();
    let (intercept, slope) = linear_fit(&x, &y)?;
    let c_fit = used
        .iter()
        .map(|r| r.hm1_true / r.lambda.powf(exponent))
        .fold(0.0, f64::max);
    Ok(ExponentFit {
        slope,
        intercept,
        exponent,
        c_fit,
        rows: used.len(),
    })
}
