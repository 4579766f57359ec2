//! Banded LU factorization with partial pivoting for complex systems.

use crate::error::{Error, Result};
use crate::C64;

/// Column-major band storage in the layout used by LAPACK `gbtrf`:
/// entry `(r, c)` lives at `ab[(kl + ku + r - c) + c * ldab]`.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors the matrix whose entries are given by `entry(r, c)` for `|r - c|` within the bands.
    pub fn factor<F: Fn(usize, usize) -> C64>(n: usize, kl: usize, ku: usize, entry: F) -> Result<Self> {
        let ldab = 2 * kl + ku + 1;
        let zero = C64::new(0.0, 0.0);
        let mut ab = vec![zero; ldab * n];
        let kv = kl + ku;
        for c in 0..n {
            let r0 = c.saturating_sub(ku);
            let r1 = (c + kl).min(n - 1);
            for r in r0..=r1 {
                ab[(kv + r - c) + c * ldab] = entry(r, c);
            }
        }
        let mut pivots = vec![0usize; n];
        let at = |r: usize, c: usize| (kv + r - c) + c * ldab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = ab[at(j, j)].norm();
            for i in 1..=km {
                let v = ab[at(j + i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[j] = j + p;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    ab.swap(at(j, c), at(j + p, c));
                }
            }
            let inv = C64::new(1.0, 0.0) / ab[at(j, j)];
            for i in 1..=km {
                ab[at(j + i, j)] *= inv;
            }
            for c in j + 1..=ju {
                let u = ab[at(j, c)];
                if u == zero {
                    continue;
                }
                for i in 1..=km {
                    let l = ab[at(j + i, j)];
                    ab[at(j + i, c)] -= l * u;
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            pivots,
        })
    }

    pub fn solve(&self, b: &mut [C64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        let at = |r: usize, c: usize| (kv + r - c) + c * self.ldab;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            for i in 1..=km {
                b[j + i] -= self.ab[at(j + i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[at(j, j)];
            let bj = b[j];
            let r0 = j.saturating_sub(kv);
            for r in r0..j {
                b[r] -= self.ab[at(r, j)] * bj;
            }
        }
    }
}
