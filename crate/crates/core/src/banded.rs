//! Banded matrices and LU factorization with partial pivoting inside the band.
//!
//! Storage is row-compact: row `i` keeps columns `i - kl ..= i + ku` in
//! `kl + ku + 1` slots. The factorization follows the classic
//! `bandec`/`banbks` scheme: rows are kept left-justified so that during
//! elimination step `k` slot 0 of every active row refers to column `k`, and
//! the upper factor (bandwidth `kl + ku` after interchanges) fits in the same
//! slots.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `value` to entry `(i, j)`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku));
        self.data[s] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku));
        self.data[s] = value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let mm = self.width;
        let mut a = self.data;
        // left-justify the first kl rows
        let mut l = kl;
        for i in 0..kl.min(n) {
            for j in l..mm {
                a[i * mm + j - l] = a[i * mm + j];
            }
            for j in (mm - l)..mm {
                a[i * mm + j] = 0.0;
            }
            l -= 1;
        }
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut pivot = a[k * mm];
            let mut p = k;
            let last = (k + kl).min(n - 1);
            for j in (k + 1)..=last {
                if a[j * mm].abs() > pivot.abs() {
                    pivot = a[j * mm];
                    p = j;
                }
            }
            pivots[k] = p;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix(k));
            }
            if p != k {
                for j in 0..mm {
                    a.swap(k * mm + j, p * mm + j);
                }
            }
            for i in (k + 1)..=last {
                let factor = a[i * mm] / a[k * mm];
                lower[k * kl.max(1) + (i - k - 1)] = factor;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - factor * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(BandedLu {
            n,
            kl,
            mm,
            upper: a,
            lower,
            pivots,
        })
    }
}

/// LU factors of a [`BandedMatrix`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    mm: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, mm) = (self.n, self.kl, self.mm);
        assert_eq!(b.len(), n);
        let lw = kl.max(1);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for i in (k + 1)..=last {
                b[i] -= self.lower[k * lw + (i - k - 1)] * b[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in 1..l {
                s -= self.upper[i * mm + k] * b[k + i];
            }
            b[i] = s / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
