//! Symmetric eigensolvers: dense (small grids) and block Davidson with
//! shift-invert expansion (large grids).

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Lowest eigenpairs, ascending, with Euclidean-orthonormal vectors.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `||A x - θ x||` per pair.
    pub residuals: Vec<f64>,
}

/// Lowest `k` eigenpairs of a dense symmetric matrix.
pub fn dense_eigen(a: &Mat<f64>, k: usize) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if k > n {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: n,
        });
    }
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NotConverged {
            what: "dense symmetric eigensolver",
            residual: f64::NAN,
            iterations: 0,
        })?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        values.push(s[j]);
        vectors.push((0..n).map(|i| u[(i, j)]).collect::<Vec<f64>>());
    }
    Ok(SymmetricEigen {
        residuals: vec![0.0; values.len()],
        values,
        vectors,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct IterativeEigenOptions {
    /// Extra Ritz pairs carried beyond the wanted ones.
    pub guard: usize,
    /// Convergence: `||A x - θ x|| <= tol * max(1, |θ|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for IterativeEigenOptions {
    fn default() -> Self {
        IterativeEigenOptions {
            guard: 8,
            tol: 1e-9,
            max_iter: 400,
            seed: 0x5eed,
        }
    }
}

/// Lowest `k` eigenpairs of a symmetric operator by block Davidson iteration:
/// the search space grows by `(A - σ)^-1` applied to Ritz residuals, and is
/// restarted from the current Ritz vectors when it gets too large.
/// `solve(b)` must return `(A - σ)^-1 b` for a shift `σ` below the spectrum.
pub fn iterative_eigen<A, S>(len: usize, k: usize, apply: A, solve: S, opts: IterativeEigenOptions) -> Result<SymmetricEigen>
where
    A: Fn(&[f64], &mut [f64]),
    S: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if k > len {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: len,
        });
    }
    if k == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
        });
    }
    let b = (k + opts.guard).min(len);
    let max_basis = (3 * b).max(b + 8).min(len);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut pending: Vec<Vec<f64>> = Vec::new();
    while pending.len() < b {
        pending.push((0..len).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let mut worst = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let mut added = 0;
        for v in pending.drain(..) {
            if basis.len() >= len {
                break;
            }
            if let Some(q) = orthonormalize(v, &basis) {
                let mut aq = vec![0.0; len];
                apply(&q, &mut aq);
                let row: Vec<f64> = basis.iter().map(|p| dot(p, &aq)).collect();
                for (hi, r) in h.iter_mut().zip(&row) {
                    hi.push(*r);
                }
                let mut row = row;
                row.push(dot(&q, &aq));
                h.push(row);
                basis.push(q);
                images.push(aq);
                added += 1;
            }
        }
        if added == 0 && iter > 0 {
            return Err(Error::NotConverged {
                what: "block Davidson eigensolver (search space stagnated)",
                residual: worst,
                iterations: iter,
            });
        }
        let m = basis.len();
        let mut hm = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = 0.5 * (h[i][j] + h[j][i]);
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
        let keep = b.min(m);
        let small = dense_eigen(&hm, keep)?;
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        let mut residuals = Vec::with_capacity(keep);
        let mut residual_vectors = Vec::with_capacity(keep);
        worst = 0.0;
        for (j, (theta, y)) in small.values.iter().zip(&small.vectors).enumerate() {
            let mut x = vec![0.0; len];
            let mut ax = vec![0.0; len];
            for (c, (q, aq)) in y.iter().zip(basis.iter().zip(&images)) {
                for t in 0..len {
                    x[t] += c * q[t];
                    ax[t] += c * aq[t];
                }
            }
            let r: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a - theta * v).collect();
            let rn = dot(&r, &r).sqrt();
            let rel = rn / theta.abs().max(1.0);
            if j < k {
                worst = worst.max(rel);
            }
            residuals.push(rn);
            residual_vectors.push((rel, r));
            ritz.push(x);
            ritz_images.push(ax);
        }
        if worst <= opts.tol && small.values.len() >= k {
            return Ok(SymmetricEigen {
                values: small.values[..k].to_vec(),
                vectors: ritz.into_iter().take(k).collect(),
                residuals: residuals[..k].to_vec(),
            });
        }
        for (rel, r) in residual_vectors {
            if rel > opts.tol * 0.1 {
                pending.push(solve(&r)?);
            }
        }
        if m + pending.len() > max_basis {
            // Restart from the Ritz block; it is orthonormal and A-diagonal.
            basis = ritz;
            images = ritz_images;
            h = (0..basis.len())
                .map(|i| {
                    (0..basis.len())
                        .map(|j| if i == j { small.values[i] } else { 0.0 })
                        .collect()
                })
                .collect();
        }
    }
    Err(Error::NotConverged {
        what: "block Davidson eigensolver",
        residual: worst,
        iterations: opts.max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two passes of classical Gram-Schmidt; `None` if the vector is numerically dependent.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, &v)).collect();
        for (c, q) in coeffs.iter().zip(basis) {
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    }
    let nrm = dot(&v, &v).sqrt();
    if nrm <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    Some(v)
}
