//! The Maxwell potential `Phi[u]`: the unique solution of
//! `-Laplace(Phi) + u^2 Phi = -omega u^2`, radially symmetric.
//!
//! The discrete operator `K + diag(W u^2)` is a symmetric M-matrix, so the
//! tridiagonal solve is stable without pivoting and the discrete maximum
//! principle gives `-omega <= Phi <= 0` (for `omega > 0`) node-wise.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{self, GridError, RadialField};
use crate::linalg::{self, LinalgError};
use crate::params::KgmParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhiError {
    #[error("grid dimension {grid} does not match parameter dimension {params}")]
    DimensionMismatch { grid: usize, params: usize },
    #[error("Maxwell system: {0}")]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Closure of the Maxwell equation at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiBoundary {
    /// `Phi(r_max) = 0`.
    #[default]
    Dirichlet,
    /// `Phi' + (N-2) Phi / r = 0` at `r_max`: matches the decaying harmonic
    /// exterior solution exactly.
    Robin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSolution {
    pub phi: RadialField,
    pub boundary: PhiBoundary,
    /// Weighted discrete L2 norm of `-Laplace(Phi) + u^2 Phi + omega u^2`.
    pub residual_norm: f64,
    /// Largest distance outside the band between `0` and `-omega`, over
    /// nodes where `u` is non-negligible.
    pub bound_violation: f64,
    /// Same, over all nodes (reported only).
    pub bound_violation_everywhere: f64,
    pub energy_identity_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiDiagnostics {
    pub residual_norm: f64,
    pub bound_violation: f64,
    pub energy_identity_gap: f64,
}

impl PhiSolution {
    pub fn diagnostics(&self) -> PhiDiagnostics {
        PhiDiagnostics {
            residual_norm: self.residual_norm,
            bound_violation: self.bound_violation,
            energy_identity_gap: self.energy_identity_gap,
        }
    }
}

/// Default tolerance on [`PhiSolution::bound_violation`].
pub fn bound_tolerance(omega: f64) -> f64 {
    1e-8 * omega.abs()
}

/// Solve with the default Dirichlet closure.
pub fn solve_phi(u: &RadialField, params: &KgmParams) -> Result<PhiSolution, PhiError> {
    solve_phi_with(u, params, PhiBoundary::Dirichlet)
}

pub fn solve_phi_with(u: &RadialField, params: &KgmParams, boundary: PhiBoundary) -> Result<PhiSolution, PhiError> {
    let g = u.grid();
    if g.dimension() != params.dimension() {
        return Err(PhiError::DimensionMismatch { grid: g.dimension(), params: params.dimension() });
    }
    let omega = params.omega();
    let phi = solve_values(u, omega, boundary)?;
    let phi = RadialField::new(g.clone(), phi)?;
    let residual_norm = residual(u, &phi, omega, boundary);
    let (bound_violation, bound_violation_everywhere) = band_violation(u, &phi, omega);
    let energy_identity_gap = identity_gap(u, &phi, omega, boundary);
    Ok(PhiSolution {
        phi,
        boundary,
        residual_norm,
        bound_violation,
        bound_violation_everywhere,
        energy_identity_gap,
    })
}

/// Bare tridiagonal solve returning nodal values of `Phi[u]`.
pub(crate) fn solve_values(u: &RadialField, omega: f64, boundary: PhiBoundary) -> Result<Vec<f64>, PhiError> {
    let g = u.grid();
    let n = g.len();
    let v = u.values();
    if omega == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let faces = g.face_coefficients();
    let w = g.lumped_weights();
    let mut diag: Vec<f64> = (0..n).map(|i| w[i] * v[i] * v[i]).collect();
    for (i, a) in faces.iter().enumerate() {
        diag[i] += a;
        diag[i + 1] += a;
    }
    let off: Vec<f64> = faces.iter().map(|a| -a).collect();
    let rhs: Vec<f64> = (0..n).map(|i| -omega * w[i] * v[i] * v[i]).collect();
    let mut phi = vec![0.0; n];
    match boundary {
        PhiBoundary::Dirichlet => {
            let m = n - 1;
            let x = linalg::solve_symmetric_tridiagonal(&diag[..m], &off[..m - 1], &rhs[..m])?;
            phi[..m].copy_from_slice(&x);
        }
        PhiBoundary::Robin => {
            diag[n - 1] += g.exterior_coefficient();
            phi = linalg::solve_symmetric_tridiagonal(&diag, &off, &rhs)?;
        }
    }
    Ok(phi)
}

/// Nodal residual `(K Phi)_i + W_i (u_i^2 Phi_i + omega u_i^2)` on the
/// unknown nodes, measured as `sqrt(sum r_i^2 / W_i)`.
fn residual(u: &RadialField, phi: &RadialField, omega: f64, boundary: PhiBoundary) -> f64 {
    let g = u.grid();
    let n = g.len();
    let w = g.lumped_weights();
    let (v, p) = (u.values(), phi.values());
    let mut r = grid::stiffness_apply(g, p);
    for i in 0..n {
        r[i] += w[i] * v[i] * v[i] * (p[i] + omega);
    }
    let m = match boundary {
        PhiBoundary::Dirichlet => n - 1,
        PhiBoundary::Robin => {
            r[n - 1] += g.exterior_coefficient() * p[n - 1];
            n
        }
    };
    (0..m).map(|i| r[i] * r[i] / w[i]).sum::<f64>().sqrt()
}

/// Distance of `Phi` outside the closed band between `0` and `-omega`:
/// (restricted to `|u_i| > 1e-14 max|u|`, everywhere).
pub fn band_violation(u: &RadialField, phi: &RadialField, omega: f64) -> (f64, f64) {
    let lo = (-omega).min(0.0);
    let hi = (-omega).max(0.0);
    let cutoff = 1e-14 * u.max_abs();
    let mut on_support = 0.0_f64;
    let mut everywhere = 0.0_f64;
    for (&x, &p) in u.values().iter().zip(phi.values()) {
        let d = (lo - p).max(p - hi).max(0.0);
        everywhere = everywhere.max(d);
        if x.abs() > cutoff {
            on_support = on_support.max(d);
        }
    }
    (on_support, everywhere)
}

/// `|int |grad Phi|^2 + int omega u^2 Phi + int u^2 Phi^2|` with Simpson
/// quadrature and the second-order gradient stencil. Under the Robin
/// closure the exterior harmonic energy is included.
pub fn energy_identity_gap(u: &RadialField, sol: &PhiSolution, params: &KgmParams) -> f64 {
    identity_gap(u, &sol.phi, params.omega(), sol.boundary)
}

fn identity_gap(u: &RadialField, phi: &RadialField, omega: f64, boundary: PhiBoundary) -> f64 {
    let g = u.grid();
    let dphi = grid::gradient(phi);
    let q = g.quadrature_weights();
    let (v, p, d) = (u.values(), phi.values(), dphi.values());
    let mut total: f64 = (0..g.len())
        .map(|i| q[i] * (d[i] * d[i] + omega * v[i] * v[i] * p[i] + v[i] * v[i] * p[i] * p[i]))
        .sum();
    if boundary == PhiBoundary::Robin {
        let last = p[p.len() - 1];
        total += g.exterior_coefficient() * last * last;
    }
    total.abs()
}

/// Write `r,phi` rows.
pub fn write_phi_csv<W: std::io::Write>(phi: &RadialField, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,phi")?;
    for (r, v) in phi.grid().nodes().iter().zip(phi.values()) {
        writeln!(out, "{r:e},{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use proptest::prelude::*;

    fn params(n: usize, omega: f64) -> KgmParams {
        KgmParams::control(n, 1.0, omega, 1.0, 3.0).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_potential() {
        let g = RadialGrid::new(3, 10.0, 257).unwrap();
        let sol = solve_phi(&RadialField::zeros(g), &params(3, 1.0)).unwrap();
        assert!(sol.phi.values().iter().all(|&p| p == 0.0));
        assert_eq!(sol.residual_norm, 0.0);
        assert_eq!(sol.energy_identity_gap, 0.0);
    }

    #[test]
    fn zero_omega_gives_zero_potential() {
        let g = RadialGrid::new(4, 10.0, 257).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp());
        let sol = solve_phi(&u, &params(4, 0.0)).unwrap();
        assert!(sol.phi.values().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn gaussian_potential_is_monotone_in_band() {
        let g = RadialGrid::new(3, 20.0, 2049).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp());
        let sol = solve_phi(&u, &params(3, 1.0)).unwrap();
        let p = sol.phi.values();
        assert!(p.iter().all(|&x| (-1.0..=0.0).contains(&x)));
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        assert!(sol.residual_norm < 1e-10, "{}", sol.residual_norm);
        assert!(sol.energy_identity_gap < 1e-6);
    }

    #[test]
    fn robin_sits_below_dirichlet() {
        // Robin lets the potential keep its harmonic tail instead of being
        // forced to zero at r_max, so it is more negative everywhere.
        let g = RadialGrid::new(3, 10.0, 513).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp());
        let p = params(3, 1.0);
        let d = solve_phi_with(&u, &p, PhiBoundary::Dirichlet).unwrap();
        let r = solve_phi_with(&u, &p, PhiBoundary::Robin).unwrap();
        for (a, b) in d.phi.values().iter().zip(r.phi.values()) {
            assert!(b <= a);
        }
        assert!(r.phi.values().last().unwrap() < &0.0);
        assert!(r.residual_norm < 1e-12);
    }

    #[test]
    fn csv_header() {
        let g = RadialGrid::new(3, 1.0, 16).unwrap();
        let mut buf = Vec::new();
        write_phi_csv(&RadialField::zeros(g), &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("r,phi\n"));
    }

    proptest! {
        #[test]
        fn sign_equivariance_and_evenness(a in 0.1f64..3.0, s in 0.3f64..2.0, w in 0.05f64..2.0) {
            let g = RadialGrid::new(5, 8.0, 129).unwrap();
            let u = RadialField::from_fn(g, |r| a * (-(r / s).powi(2)).exp());
            let plus = solve_phi(&u, &params(5, w)).unwrap();
            let minus = solve_phi(&u, &params(5, -w)).unwrap();
            let neg_u = solve_phi(&u.scaled(-1.0), &params(5, w)).unwrap();
            for i in 0..u.len() {
                prop_assert!((plus.phi.values()[i] + minus.phi.values()[i]).abs() < 1e-14 * w);
                prop_assert_eq!(plus.phi.values()[i], neg_u.phi.values()[i]);
            }
            prop_assert!(minus.bound_violation <= bound_tolerance(w));
        }
    }
}
