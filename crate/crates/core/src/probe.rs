//! Complex plane-wave probes `f = exp(i (τ ± i) η± · x)` with
//! `η± = β η ∓ ξ / (2τ)` and `β = sqrt(1 - |ξ|² / (4τ²))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Grid, Point};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsozakiProbe {
    dim: usize,
    xi: Point,
    eta: Point,
    tau: f64,
    beta: f64,
    eta_plus: Point,
    eta_minus: Point,
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn to_point(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    p
}

impl IsozakiProbe {
    /// Requires `|η| = 1`, `η ⟂ ξ` and `τ > |ξ| / 2`.
    pub fn new(xi: &[f64], eta: &[f64], tau: f64) -> Result<Self> {
        let dim = xi.len();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidProbe(format!("dimension must be 2 or 3, got {dim}")));
        }
        if eta.len() != dim {
            return Err(Error::InvalidProbe("ξ and η have different dimensions".into()));
        }
        let xi = to_point(xi);
        let eta = to_point(eta);
        let xi_norm = dot(&xi, &xi).sqrt();
        if (dot(&eta, &eta).sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbe("η must be a unit vector".into()));
        }
        if dot(&eta, &xi).abs() > 1e-12 * xi_norm.max(1.0) {
            return Err(Error::InvalidProbe("η must be orthogonal to ξ".into()));
        }
        if !(tau.is_finite() && tau > 0.5 * xi_norm) {
            return Err(Error::InvalidProbe(format!(
                "τ = {tau} must exceed |ξ|/2 = {}",
                0.5 * xi_norm
            )));
        }
        let beta = (1.0 - dot(&xi, &xi) / (4.0 * tau * tau)).sqrt();
        let mut eta_plus = [0.0; 3];
        let mut eta_minus = [0.0; 3];
        for a in 0..dim {
            eta_plus[a] = beta * eta[a] - xi[a] / (2.0 * tau);
            eta_minus[a] = beta * eta[a] + xi[a] / (2.0 * tau);
        }
        Ok(IsozakiProbe {
            dim,
            xi,
            eta,
            tau,
            beta,
            eta_plus,
            eta_minus,
        })
    }

    /// Uses a canonical unit direction orthogonal to `ξ`.
    pub fn with_default_direction(xi: &[f64], tau: f64) -> Result<Self> {
        let eta = default_direction(xi);
        Self::new(xi, &eta, tau)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi[..self.dim]
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta[..self.dim]
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn direction(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Plus => &self.eta_plus[..self.dim],
            Sign::Minus => &self.eta_minus[..self.dim],
        }
    }

    fn dir(&self, sign: Sign) -> &Point {
        match sign {
            Sign::Plus => &self.eta_plus,
            Sign::Minus => &self.eta_minus,
        }
    }

    /// `τ ± i`.
    pub fn wavenumber(&self, sign: Sign) -> C64 {
        C64::new(self.tau, sign.value())
    }

    /// `(τ ± i)²`.
    pub fn lambda(&self, sign: Sign) -> C64 {
        let k = self.wavenumber(sign);
        k * k
    }

    pub fn eval(&self, sign: Sign, x: &Point) -> C64 {
        (C64::i() * self.wavenumber(sign) * dot(self.dir(sign), x)).exp()
    }

    /// Outward normal derivative `i (τ ± i) (η± · ν) f`.
    pub fn normal_derivative(&self, sign: Sign, x: &Point, normal: &Point) -> C64 {
        C64::i() * self.wavenumber(sign) * dot(self.dir(sign), normal) * self.eval(sign, x)
    }

    pub fn on_grid(&self, sign: Sign, grid: &Grid) -> Vec<C64> {
        grid.sample(|x| self.eval(sign, x))
    }

    pub fn on_boundary(&self, sign: Sign, mesh: &BoundaryMesh) -> Vec<C64> {
        mesh.nodes.iter().map(|b| self.eval(sign, &b.position)).collect()
    }

    pub fn normal_derivative_on_boundary(&self, sign: Sign, mesh: &BoundaryMesh) -> Vec<C64> {
        mesh.nodes
            .iter()
            .map(|b| self.normal_derivative(sign, &b.position, &b.normal))
            .collect()
    }

    /// `f+(x) conj(f-(x))` evaluated through the combined exponent
    /// `i (τ + i) (η+ - η-) · x`.
    pub fn product(&self, x: &Point) -> C64 {
        let mut diff = [0.0; 3];
        for a in 0..self.dim {
            diff[a] = self.eta_plus[a] - self.eta_minus[a];
        }
        (C64::i() * self.wavenumber(Sign::Plus) * dot(&diff, x)).exp()
    }

    /// `e^{-i ξ · x}`.
    pub fn target(&self, x: &Point) -> C64 {
        C64::new(0.0, -dot(&self.xi, x)).exp()
    }
}

/// Unit vector orthogonal to `ξ`: the rotation of `ξ` in 2D, otherwise the
/// Gram-Schmidt projection of the coordinate axis least aligned with `ξ`.
pub fn default_direction(xi: &[f64]) -> Vec<f64> {
    let d = xi.len();
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut e = vec![0.0; d];
    if norm == 0.0 {
        e[0] = 1.0;
        return e;
    }
    if d == 2 {
        return vec![-xi[1] / norm, xi[0] / norm];
    }
    let axis = (0..d)
        .min_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs()))
        .unwrap_or(0);
    e[axis] = 1.0;
    let c = xi[axis] / (norm * norm);
    for a in 0..d {
        e[a] -= c * xi[a];
    }
    let en = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    e.iter_mut().for_each(|v| *v /= en);
    e
}

/// `max_x |f+ conj(f-) - e^{-i ξ · x}|` over the interior nodes.
pub fn product_defect(probe: &IsozakiProbe, grid: &Grid) -> f64 {
    grid.points()
        .map(|x| (probe.product(&x) - probe.target(&x)).norm())
        .fold(0.0, f64::max)
}
