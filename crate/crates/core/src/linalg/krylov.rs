//! Restarted GMRES with right preconditioning, and preconditioned CG.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::C64;

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-12,
            restart: 30,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`, recomputed from scratch.
    pub residual: f64,
}

/// Solves `A x = b` starting from `x`; `apply(v, out)` sets `out = A v`,
/// `precond(v)` overwrites `v` with `M^-1 v`.
pub fn gmres<A, M>(apply: A, precond: M, b: &[C64], x: &mut [C64], opts: KrylovOptions) -> Result<KrylovReport>
where
    A: Fn(&[C64], &mut [C64]),
    M: Fn(&mut [C64]),
{
    let len = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return Ok(KrylovReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = opts.restart.max(1);
    let mut r = vec![zero; len];
    let mut w = vec![zero; len];
    let mut iterations = 0;
    let mut rel;
    loop {
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![zero; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut steps = 0;
        for j in 0..m {
            let mut z = basis[j].clone();
            precond(&mut z);
            apply(&z, &mut w);
            drop(z);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                hess[i][j] = hij;
                axpy(-hij, v, &mut w);
            }
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                hess[i][j] += c;
                axpy(-c, v, &mut w);
            }
            let hnext = norm(&w);
            hess[j + 1][j] = C64::new(hnext, 0.0);
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i].conj() * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (c, s) = givens(hess[j][j], hess[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            hess[j][j] = c * hess[j][j] + s * hess[j + 1][j];
            hess[j + 1][j] = zero;
            g[j + 1] = -s.conj() * g[j];
            g[j] *= c;
            steps = j + 1;
            iterations += 1;
            let est = g[j + 1].norm() / bnorm;
            if est <= opts.tol * 0.5 || hnext == 0.0 || iterations >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= hess[i][k] * y[k];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![zero; len];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut update);
        }
        drop(basis);
        precond(&mut update);
        for (xi, ui) in x.iter_mut().zip(&update) {
            *xi += ui;
        }
    }
    if rel > opts.tol {
        return Err(Error::NotConverged {
            what: "GMRES",
            residual: rel,
            iterations,
        });
    }
    Ok(KrylovReport {
        iterations,
        residual: rel,
    })
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Preconditioned conjugate gradients for a Hermitian positive definite `A`.
pub fn pcg<A, M>(apply: A, precond: M, b: &[C64], x: &mut [C64], opts: KrylovOptions) -> Result<KrylovReport>
where
    A: Fn(&[C64], &mut [C64]),
    M: Fn(&mut [C64]),
{
    let len = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return Ok(KrylovReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![zero; len];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = r.clone();
    precond(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut ap = vec![zero; len];
    let mut iterations = 0;
    let mut rel = norm(&r) / bnorm;
    while rel > opts.tol && iterations < opts.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            return Err(Error::Singular("operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        axpy(C64::new(alpha, 0.0), &p, x);
        axpy(C64::new(-alpha, 0.0), &ap, &mut r);
        z.copy_from_slice(&r);
        precond(&mut z);
        let rz_next = dot(&r, &z).re;
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + *pi * beta;
        }
        iterations += 1;
        rel = norm(&r) / bnorm;
    }
    apply(x, &mut ap);
    let true_res = ap.iter().zip(b).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>().sqrt() / bnorm;
    if true_res > opts.tol * 10.0 {
        return Err(Error::NotConverged {
            what: "conjugate gradients",
            residual: true_res,
            iterations,
        });
    }
    Ok(KrylovReport {
        iterations,
        residual: true_res,
    })
}
