//! Independent oracles shared by the integration tests. Nothing here calls
//! into the discretisation helpers of the library: matrices, weights and
//! quadratures are rebuilt from their definitions.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Area of the unit sphere in R^N by the recursion `A_{N} = 2 pi A_{N-2} / (N-2)`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n as f64 - 2.0),
    }
}

/// Recursive adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Adaptive Simpson over consecutive pieces.
pub fn piecewise_simpson(f: &dyn Fn(f64) -> f64, points: &[f64], tol: f64) -> f64 {
    points.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], tol)).sum()
}

/// Gaussian elimination with partial pivoting on a dense row-major matrix.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Uniform nodes `r_i = i h` on `[0, r_max]`.
pub fn nodes(r_max: f64, n: usize) -> Vec<f64> {
    let h = r_max / (n - 1) as f64;
    (0..n).map(|i| i as f64 * h).collect()
}

/// Control-volume weights of the variational discretisation: flux
/// coefficients at the half nodes and lumped cell volumes (the cell
/// `[0, h/2]` around the origin, half a cell at `r_max`).
pub fn fv_coefficients(n_dim: usize, r_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = r_max / (n - 1) as f64;
    let area = sphere_area(n_dim);
    let d = n_dim as f64;
    let faces: Vec<f64> = (0..n - 1).map(|i| area * ((i as f64 + 0.5) * h).powf(d - 1.0) / h).collect();
    let mut w: Vec<f64> = (0..n).map(|i| area * h * (i as f64 * h).powf(d - 1.0)).collect();
    w[0] = area * (0.5 * h).powf(d) / d;
    w[1] -= w[0];
    w[n - 1] *= 0.5;
    (faces, w)
}

/// Dense Maxwell solve: `(K + W u^2) phi = -omega W u^2`, closed either by
/// `phi(r_max) = 0` or by the exterior harmonic tail.
pub fn dense_maxwell(n_dim: usize, r_max: f64, u: &[f64], omega: f64, robin: bool) -> Vec<f64> {
    let n = u.len();
    let (faces, w) = fv_coefficients(n_dim, r_max, n);
    let m = if robin { n } else { n - 1 };
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        a[i][i] += w[i] * u[i] * u[i];
        b[i] = -omega * w[i] * u[i] * u[i];
    }
    for (i, f) in faces.iter().enumerate() {
        if i < m {
            a[i][i] += f;
        }
        if i + 1 < m {
            a[i + 1][i + 1] += f;
            a[i][i + 1] -= f;
            a[i + 1][i] -= f;
        }
    }
    if robin {
        a[n - 1][n - 1] += sphere_area(n_dim) * (n_dim as f64 - 2.0) * r_max.powf(n_dim as f64 - 2.0);
    }
    let mut x = gauss_solve(a, b);
    x.resize(n, 0.0);
    x
}

/// Piecewise-cubic (Catmull-Rom) interpolant of nodal data.
pub fn cubic_interpolant<'a>(r: &'a [f64], v: &'a [f64]) -> impl Fn(f64) -> f64 + 'a {
    let h = r[1] - r[0];
    let n = r.len();
    move |x: f64| {
        if x >= r[n - 1] {
            return v[n - 1];
        }
        let k = ((x / h).floor() as usize).min(n - 2);
        let t = x / h - k as f64;
        // Even reflection at the origin, linear extension at the far end.
        let at = |j: isize| -> f64 {
            if j < 0 {
                v[(-j) as usize]
            } else if j as usize >= n {
                2.0 * v[n - 1] - v[n - 2]
            } else {
                v[j as usize]
            }
        };
        let k = k as isize;
        let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        0.5 * ((2.0 * p1)
            + (-p0 + p2) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
    }
}

/// Smooth test field built from Gaussian bumps with a linear taper to zero
/// at `r_max`; coefficients come from a simple LCG so the oracle does not
/// share an RNG with the library.
pub struct Bumps {
    pub terms: Vec<(f64, f64, f64)>,
    pub r_max: f64,
}

impl Bumps {
    pub fn new(seed: u64, r_max: f64) -> Self {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let terms = (0..3)
            .map(|_| (4.0 * next() - 2.0, 0.3 * r_max * next(), 0.3 + 1.7 * next()))
            .collect();
        Self { terms, r_max }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let taper = 1.0 - r / self.r_max;
        taper * self.terms.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum::<f64>()
    }
}
