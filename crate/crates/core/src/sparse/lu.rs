//! Banded LU with partial pivoting.
//!
//! Structured-mesh Jacobians have a narrow band in natural node order, so
//! the factorization stores each row as a dense window
//! `[i - kl, i + kl + ku]` (the extra `kl` holds fill from row swaps). The
//! row multipliers are kept per elimination step, LAPACK `gbtrf` style, so
//! both `A x = b` and `Aᵀ x = b` reuse one factorization.

use alloc::vec;
use alloc::vec::Vec;

use super::{CsrMatrix, SparseError};
use crate::math::abs;

const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// U factor, row-windowed.
    band: Vec<f64>,
    /// Multipliers of step k at `k * kl ..`.
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Self, SparseError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SparseError::NotSquare {
                nrows: n,
                ncols: a.ncols(),
            });
        }
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + j + kl - i] = v;
            }
        }
        let tol = PIVOT_TOL * a.max_abs();
        let mut multipliers = vec![0.0; n * kl];
        let mut pivots = vec![0; n];

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let at = |i: usize, j: usize| i * width + j + kl - i;

            let mut p = k;
            let mut best = abs(band[at(k, k)]);
            for i in k + 1..=last_row {
                let v = abs(band[at(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tol || best == 0.0 {
                return Err(SparseError::Singular {
                    step: k,
                    pivot: best,
                });
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    band.swap(at(k, j), at(p, j));
                }
            }

            let pivot = band[at(k, k)];
            let (head, tail) = band.split_at_mut((k + 1) * width);
            let pivot_row = &head[at(k, k + 1)..=at(k, last_col)];
            for i in k + 1..=last_row {
                let base = i * width - (k + 1) * width;
                let l = tail[base + k + kl - i] / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                tail[base + k + kl - i] = 0.0;
                if l != 0.0 {
                    let start = base + k + 1 + kl - i;
                    let row = &mut tail[start..start + pivot_row.len()];
                    for (r, u) in row.iter_mut().zip(pivot_row) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Factorization {
            n,
            kl,
            ku,
            width,
            band,
            multipliers,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn u(&self, i: usize, j: usize) -> f64 {
        self.band[i * self.width + j + self.kl - i]
    }

    fn check(&self, b: &[f64]) -> Result<(), SparseError> {
        if b.len() == self.n {
            Ok(())
        } else {
            Err(SparseError::Dimension {
                expected: self.n,
                got: b.len(),
            })
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check(b)?;
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.multipliers[k * kl + (i - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.u(k, j) * x[j];
            }
            x[k] = s / self.u(k, k);
        }
        Ok(x)
    }

    /// Solve `Aᵀ x = b` with the same factors.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, SparseError> {
        self.check(b)?;
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        // Uᵀ z = b
        for k in 0..n {
            x[k] /= self.u(k, k);
            let xk = x[k];
            if xk != 0.0 {
                for j in k + 1..=(k + kl + ku).min(n - 1) {
                    x[j] -= self.u(k, j) * xk;
                }
            }
        }
        // then the transposed row operations, last step first
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.multipliers[k * kl + (i - k - 1)] * x[i];
            }
            x[k] = s;
            x.swap(k, self.pivots[k]);
        }
        Ok(x)
    }
}
