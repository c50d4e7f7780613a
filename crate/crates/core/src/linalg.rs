//! Small direct solvers: three-band systems with one-sided boundary rows and
//! banded LU without pivoting for the Cartesian M-matrices.

use std::ops::{Add, Mul, Sub};

/// Scalar types the real-coefficient solvers can act on.
pub trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Field for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
}

/// A system where every row couples three consecutive unknowns starting at
/// column `start`. Interior rows are centered; the first and last rows may be
/// one-sided (columns 0..3 and n-3..n).
#[derive(Debug, Clone)]
pub struct ThreeBand {
    pub rows: Vec<(usize, [f64; 3])>,
}

/// Factorization of a [`ThreeBand`] system, reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct ThreeBandLu {
    n: usize,
    // multipliers used to remove the third entry of the first/last row
    first_mult: f64,
    last_mult: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("system too small: {0} unknowns")]
    TooSmall(usize),
}

impl ThreeBand {
    pub fn factor(&self) -> Result<ThreeBandLu, LinalgError> {
        let n = self.rows.len();
        if n < 3 {
            return Err(LinalgError::TooSmall(n));
        }
        // dense tridiagonal coefficients: sub[i] (col i-1), dia[i], sup[i] (col i+1)
        let mut sub = vec![0.0; n];
        let mut dia = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for (i, &(s, w)) in self.rows.iter().enumerate().skip(1).take(n - 2) {
            debug_assert_eq!(s, i - 1);
            sub[i] = w[0];
            dia[i] = w[1];
            sup[i] = w[2];
        }
        let (s0, w0) = self.rows[0];
        debug_assert_eq!(s0, 0);
        let (_, w1) = self.rows[1];
        let first_mult = if w1[2] != 0.0 { w0[2] / w1[2] } else { 0.0 };
        if w0[2] != 0.0 && w1[2] == 0.0 {
            return Err(LinalgError::ZeroPivot(0));
        }
        dia[0] = w0[0] - first_mult * w1[0];
        sup[0] = w0[1] - first_mult * w1[1];

        let (sl, wl) = self.rows[n - 1];
        debug_assert_eq!(sl, n - 3);
        let (_, wp) = self.rows[n - 2];
        let last_mult = if wp[0] != 0.0 { wl[0] / wp[0] } else { 0.0 };
        if wl[0] != 0.0 && wp[0] == 0.0 {
            return Err(LinalgError::ZeroPivot(n - 1));
        }
        sub[n - 1] = wl[1] - last_mult * wp[1];
        dia[n - 1] = wl[2] - last_mult * wp[2];

        // Thomas factorization
        let mut lower = vec![0.0; n];
        let mut d = vec![0.0; n];
        d[0] = dia[0];
        if d[0] == 0.0 {
            return Err(LinalgError::ZeroPivot(0));
        }
        for i in 1..n {
            lower[i] = sub[i] / d[i - 1];
            d[i] = dia[i] - lower[i] * sup[i - 1];
            if d[i] == 0.0 || !d[i].is_finite() {
                return Err(LinalgError::ZeroPivot(i));
            }
        }
        Ok(ThreeBandLu { n, first_mult, last_mult, lower, diag: d, upper: sup })
    }

    pub fn apply<T: Field>(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|&(s, w)| x[s] * w[0] + x[s + 1] * w[1] + x[s + 2] * w[2])
            .collect()
    }
}

impl ThreeBandLu {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn solve<T: Field>(&self, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = rhs.to_vec();
        y[0] = rhs[0] - rhs[1] * self.first_mult;
        y[n - 1] = rhs[n - 1] - rhs[n - 2] * self.last_mult;
        for i in 1..n {
            y[i] = y[i] - y[i - 1] * self.lower[i];
        }
        y[n - 1] = y[n - 1] * (1.0 / self.diag[n - 1]);
        for i in (0..n - 1).rev() {
            y[i] = (y[i] - y[i + 1] * self.upper[i]) * (1.0 / self.diag[i]);
        }
        y
    }
}

/// Sparse matrix in row-list form.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    }

    /// Returns `a * I + b * self`.
    pub fn shifted(&self, a: f64, b: f64) -> SparseRows {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut out: Vec<(usize, f64)> = r.iter().map(|&(c, v)| (c, b * v)).collect();
                match out.iter_mut().find(|(c, _)| *c == i) {
                    Some(e) => e.1 += a,
                    None => out.push((i, a)),
                }
                out
            })
            .collect();
        SparseRows { rows }
    }
}

/// Band LU factorization without pivoting. Valid for the (shifted) discrete
/// Laplacians used here, which are M-matrices.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage, row i holds columns i-kl ..= i+ku
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &SparseRows) -> Result<Self, LinalgError> {
        let n = a.n();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, r) in a.rows.iter().enumerate() {
            for &(c, _) in r {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        let w = kl + ku + 1;
        let mut band = vec![0.0; n * w];
        for (i, r) in a.rows.iter().enumerate() {
            for &(c, v) in r {
                band[i * w + (c + kl - i)] += v;
            }
        }
        for k in 0..n {
            let piv = band[k * w + kl];
            if piv == 0.0 || !piv.is_finite() {
                return Err(LinalgError::ZeroPivot(k));
            }
            let imax = (k + kl).min(n - 1);
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=imax {
                let ik = i * w + (k + kl - i);
                let l = band[ik] / piv;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in k + 1..=jmax {
                    band[i * w + (j + kl - i)] -= l * band[k * w + (j + kl - k)];
                }
            }
        }
        Ok(Self { n, kl, ku, band })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let jmin = i.saturating_sub(kl);
            let mut s = y[i];
            for j in jmin..i {
                s -= self.band[i * w + (j + kl - i)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let jmax = (i + ku).min(n - 1);
            let mut s = y[i];
            for j in i + 1..=jmax {
                s -= self.band[i * w + (j + kl - i)] * y[j];
            }
            y[i] = s / self.band[i * w + kl];
        }
        y
    }
}
