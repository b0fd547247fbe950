//! Direct solvers: symmetric tridiagonal (Thomas), general banded LU with
//! partial pivoting, and a small dense LU used by the verification suite.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular system: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },
    #[error("non-finite matrix entry at row {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Solve a symmetric tridiagonal system with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples rows `i` and `i+1`).
///
/// No pivoting: intended for diagonally dominant / M-matrix systems.
pub fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    if rhs.len() != n {
        return Err(LinalgError::Dimension { expected: n, got: rhs.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(LinalgError::Dimension { expected: n - 1, got: off.len() });
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - off[i - 1] * c[i - 1];
        }
        if !pivot.is_finite() {
            return Err(LinalgError::NonFinite(i));
        }
        if pivot == 0.0 {
            return Err(LinalgError::Singular { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = off[i] / pivot;
        }
        let prev = if i > 0 { off[i - 1] * d[i - 1] } else { 0.0 };
        d[i] = (rhs[i] - prev) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` columns
/// hold fill-in from row interchanges during factorisation.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Add `value` to entry `(i, j)`. Panics if the entry lies outside the
    /// declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.slot(i, j).expect("index in range");
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let k = self.slot(i, j).expect("index in range");
        self.data[k] = value;
    }

    /// Clear row `i` and put `value` on its diagonal.
    pub fn set_identity_row(&mut self, i: usize, value: f64) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, 0.0);
        }
        self.set(i, i, value);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// Solve `A x = b` by LU with partial pivoting. Consumes the matrix.
    ///
    /// Returns the solution and the smallest pivot encountered, measured
    /// relative to the largest entry of its (original) row. A relative pivot
    /// below `1e-14` is reported as [`LinalgError::Singular`].
    pub fn solve(mut self, rhs: &[f64]) -> Result<(Vec<f64>, f64), LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Dimension { expected: n, got: rhs.len() });
        }
        if let Some(k) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(k / self.width));
        }
        let mut b = rhs.to_vec();
        let upper = self.kl + self.ku;
        let mut scale: Vec<f64> = (0..n)
            .map(|i| self.data[i * self.width..(i + 1) * self.width].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            let relative = if scale[p] > 0.0 { best / scale[p] } else { 0.0 };
            min_pivot = min_pivot.min(relative);
            if relative <= 1e-14 {
                return Err(LinalgError::Singular { row: k, pivot: relative });
            }
            let jmax = (k + upper).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j).expect("band");
                    let c = self.slot(p, j).expect("band");
                    self.data.swap(a, c);
                }
                b.swap(k, p);
                scale.swap(k, p);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let v = self.get(k, j);
                    if v != 0.0 {
                        let s = self.slot(i, j).expect("band");
                        self.data[s] -= factor * v;
                    }
                }
                let s = self.slot(i, k).expect("band");
                self.data[s] = 0.0;
                b[i] -= factor * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + upper).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Ok((b, min_pivot))
    }
}

/// Dense LU with partial pivoting on a row-major `n x n` matrix.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    if a.len() != n * n {
        return Err(LinalgError::Dimension { expected: n * n, got: a.len() });
    }
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !best.is_finite() {
            return Err(LinalgError::NonFinite(p));
        }
        if best == 0.0 {
            return Err(LinalgError::Singular { row: k, pivot: 0.0 });
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(b)
}
