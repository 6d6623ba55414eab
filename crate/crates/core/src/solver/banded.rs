//! Band-storage LU factorization with partial pivoting.
//!
//! The scheme Jacobians are banded: pentadiagonal for the 1D line subproblems
//! of the splitting scheme, bandwidth `2 * nx` for the full-2D scheme. This
//! is the classic LAPACK `gbtrf`/`gbtrs` pair in unblocked form, with `kl`
//! extra superdiagonals reserved for pivoting fill-in.

use crate::error::{Error, Result};

/// `n x n` matrix with `kl` subdiagonals and `ku` superdiagonals.
///
/// Column-major band storage: entry `(i, j)` lives at row
/// `kl + ku + i - j` of column `j`; rows `0..kl` hold pivoting fill-in.
/// Factorization happens in place so the storage can be reused across
/// Newton iterations.
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
            ipiv: vec![0; n],
            factored: false,
        }
    }

    /// Clear all entries so the storage can hold a fresh matrix.
    pub fn reset(&mut self) {
        self.ab.fill(0.0);
        self.factored = false;
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry outside band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.ab[s] += value;
    }

    #[cfg(test)]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.ab[s] = value;
    }

    /// Entry `(i, j)`, zero outside the band.
    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && i + self.ku >= j {
            self.ab[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Factor in place into `P * L * U`. Fails on exact singularity.
    pub fn factor_in_place(&mut self) -> Result<()> {
        debug_assert!(!self.factored, "matrix already factored");
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // superdiagonals in the factored form
        let ipiv = &mut self.ipiv;

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j among rows j..=j+km.
            let mut jp = 0;
            let mut best = self.ab[j * ldab + kv].abs();
            for k in 1..=km {
                let v = self.ab[j * ldab + kv + k].abs();
                if v > best {
                    best = v;
                    jp = k;
                }
            }
            ipiv[j] = j + jp;
            let pivot = self.ab[j * ldab + kv + jp];
            if pivot == 0.0 {
                return Err(Error::InvalidParam(format!(
                    "singular banded matrix at column {j}"
                )));
            }
            let cmax = (j + kv).min(n - 1);
            if jp != 0 {
                for c in j..=cmax {
                    let a = c * ldab + kv + j - c;
                    let b = c * ldab + kv + j + jp - c;
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[j * ldab + kv];
            for k in 1..=km {
                self.ab[j * ldab + kv + k] /= pivot;
            }
            for c in j + 1..=cmax {
                let a_jc = self.ab[c * ldab + kv + j - c];
                if a_jc != 0.0 {
                    for k in 1..=km {
                        self.ab[c * ldab + kv + j + k - c] -=
                            self.ab[j * ldab + kv + k] * a_jc;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = b` in place; requires a prior [`Self::factor_in_place`].
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert!(self.factored, "solve before factorization");
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        // Forward: apply P and L.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let km = kl.min(n - 1 - j);
                for k in 1..=km {
                    b[j + k] -= self.ab[j * ldab + kv + k] * bj;
                }
            }
        }
        // Backward: solve U x = y.
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                let rmin = j.saturating_sub(kv);
                for r in rmin..j {
                    b[r] -= self.ab[j * ldab + kv + r - j] * bj;
                }
            }
        }
    }
}
