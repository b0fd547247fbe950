//! Seeded invariant suite: Maxwell band and solver agreement, energy
//! identity convergence, gradient consistency, closed-form integrals,
//! Sobolev lower bound, and mountain-pass geometry.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::functional::{FunctionalOptions, ReducedFunctional};
use crate::grid::{RadialField, RadialGrid};
use crate::instanton;
use crate::linalg;
use crate::params::KgmParams;
use crate::phi::{self, PhiBoundary};
use crate::saddle;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub total: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

fn check(name: &str, values: &[f64], tolerance: f64, ok: impl Fn(f64) -> bool) -> CheckResult {
    let failures = values.iter().filter(|&&v| !ok(v)).count();
    let worst = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    CheckResult {
        name: name.into(),
        cases: values.len(),
        failures,
        worst,
        tolerance,
        passed: failures == 0 && !values.is_empty(),
    }
}

/// A smooth random radial field: sum of three Gaussian bumps, tapered to
/// vanish at `r_max`.
pub fn random_smooth_field(rng: &mut impl Rng, g: &Arc<RadialGrid>) -> RadialField {
    let r_max = g.r_max();
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.0..0.3 * r_max), rng.gen_range(0.3..2.0)))
        .collect();
    RadialField::from_fn(g.clone(), |r| {
        let taper = 1.0 - r / r_max;
        taper * bumps.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum::<f64>()
    })
}

/// Dense solve of the same Maxwell system, for agreement checks.
pub fn dense_phi(u: &RadialField, omega: f64, boundary: PhiBoundary) -> Vec<f64> {
    let g = u.grid();
    let n = g.len();
    let m = if boundary == PhiBoundary::Robin { n } else { n - 1 };
    let faces = g.face_coefficients();
    let w = g.lumped_weights();
    let v = u.values();
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        a[i * m + i] += w[i] * v[i] * v[i];
        b[i] = -omega * w[i] * v[i] * v[i];
    }
    for (i, f) in faces.iter().enumerate() {
        for (p, q) in [(i, i), (i + 1, i + 1)] {
            if p < m {
                a[p * m + q] += f;
            }
        }
        if i + 1 < m {
            a[i * m + i + 1] -= f;
            a[(i + 1) * m + i] -= f;
        }
    }
    if boundary == PhiBoundary::Robin {
        a[(n - 1) * m + n - 1] += g.exterior_coefficient();
    }
    let mut out = linalg::dense_solve(a, b).expect("Maxwell matrix is nonsingular");
    out.resize(n, 0.0);
    out
}

pub fn run(seed: u64) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // Maxwell band and banded-vs-dense agreement.
    let mut band = Vec::new();
    let mut agreement = Vec::new();
    let mut symmetry = Vec::new();
    for k in 0..100 {
        let n = 3 + k % 4;
        let g = RadialGrid::new(n, 10.0, 129).unwrap();
        let u = random_smooth_field(&mut rng, &g);
        let omega = rng.gen_range(0.1..2.0);
        let params = KgmParams::new(n, omega + 1.0, omega, 1.0, 2.5).unwrap();
        let sol = phi::solve_phi(&u, &params).unwrap();
        band.push(sol.bound_violation / omega);
        let dense = dense_phi(&u, omega, PhiBoundary::Dirichlet);
        let scale = dense.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let diff = sol.phi.values().iter().zip(&dense).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        agreement.push(diff / scale);
        let flipped = KgmParams::new(n, omega + 1.0, -omega, 1.0, 2.5).unwrap();
        let neg = phi::solve_phi(&u.scaled(-1.0), &flipped).unwrap();
        let sym = sol.phi.values().iter().zip(neg.phi.values()).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
        symmetry.push(sym / scale);
    }
    checks.push(check("phi_band", &band, 1e-8, |v| v <= 1e-8));
    checks.push(check("phi_banded_vs_dense", &agreement, 1e-10, |v| v <= 1e-10));
    checks.push(check("phi_sign_equivariance", &symmetry, 1e-12, |v| v <= 1e-12));

    // Energy identity gap under refinement.
    let gaps: Vec<f64> = [1025, 2049, 4097]
        .iter()
        .map(|&nodes| {
            let g = RadialGrid::new(3, 20.0, nodes).unwrap();
            let u = RadialField::from_fn(g, |r| (-r * r).exp());
            let params = KgmParams::new(3, 2.0, 1.0, 1.0, 3.0).unwrap();
            phi::solve_phi(&u, &params).unwrap().energy_identity_gap
        })
        .collect();
    checks.push(check("energy_identity_gap_n2049", &gaps[1..2], 1e-6, |v| v < 1e-6));
    let ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]];
    let mut ratio_check = check("energy_identity_order", &ratios, 4.8, |v| (3.2..=4.8).contains(&v));
    ratio_check.worst = ratios.iter().map(|r| (r - 4.0).abs()).fold(0.0, f64::max);
    checks.push(ratio_check);

    // Directional derivatives.
    let mut fd = Vec::new();
    for n in [3usize, 4] {
        let g = RadialGrid::new(n, 10.0, 257).unwrap();
        let params = if n == 3 {
            KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap()
        } else {
            KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap()
        };
        let f = ReducedFunctional::new(params);
        for _ in 0..20 {
            let u = random_smooth_field(&mut rng, &g);
            let v = random_smooth_field(&mut rng, &g);
            fd.push(f.check_direction(&u, &v, None).unwrap().relative_error);
        }
    }
    checks.push(check("gradient_finite_difference", &fd, 1e-5, |v| v < 1e-5));

    // Closed-form integrals.
    let mut closed = Vec::new();
    for radius in [1.0, 2.0] {
        for e in instanton::eps_decades(1.0, 6.0, 1) {
            let up = radius / e.sqrt();
            let pairs = [
                (instanton::radial_integral(4, 2.0, up), instanton::closed_form_n4_log(e, radius)),
                (instanton::radial_integral(4, 4.0, up), instanton::closed_form_n4_quartic(e, radius)),
                (instanton::radial_integral(3, 1.0, up), instanton::closed_form_n3(e, radius)),
            ];
            closed.extend(pairs.iter().map(|(q, c)| (q - c).abs() / c.abs()));
        }
    }
    checks.push(check("closed_form_integrals", &closed, 1e-8, |v| v < 1e-8));

    // Sobolev lower bound on random fields.
    let mut quotient = Vec::new();
    for n in 3..=6 {
        let s = instanton::sobolev_constant(n);
        let g = RadialGrid::new(n, 10.0, 513).unwrap();
        for _ in 0..10 {
            let u = random_smooth_field(&mut rng, &g);
            quotient.push(s - instanton::rayleigh_quotient(&u));
        }
    }
    checks.push(check("sobolev_lower_bound", &quotient, 1e-6, |v| v <= 1e-6));

    // Mountain-pass geometry: J > 0 on a small sphere, J(t d) < 0 far out.
    let mut sphere = Vec::new();
    let mut far = Vec::new();
    for n in [3usize, 4] {
        let g = RadialGrid::new(n, 10.0, 257).unwrap();
        let params = if n == 3 {
            KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap()
        } else {
            KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap()
        };
        let f = ReducedFunctional::with_options(
            params,
            FunctionalOptions { phi_boundary: PhiBoundary::Dirichlet, include_critical: true },
        );
        let dirs: Vec<RadialField> = (0..50).map(|_| random_smooth_field(&mut rng, &g)).collect();
        sphere.push(-saddle::sphere_minimum(&f, &dirs, 0.05).unwrap());
        for d in dirs.iter().take(10) {
            let (u1, _) = saddle::find_endpoint(&f, d).unwrap();
            far.push(f.value(&u1).unwrap());
        }
    }
    checks.push(check("mountain_pass_small_sphere", &sphere, 0.0, |v| v < 0.0));
    checks.push(check("mountain_pass_far_point", &far, 0.0, |v| v < 0.0));

    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport { seed, total: checks.len(), passed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matches_banded_with_robin() {
        let g = RadialGrid::new(4, 5.0, 65).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp());
        let params = KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap();
        let sol = phi::solve_phi_with(&u, &params, PhiBoundary::Robin).unwrap();
        let dense = dense_phi(&u, 1.0, PhiBoundary::Robin);
        for (a, b) in sol.phi.values().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_fields_vanish_at_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = RadialGrid::new(3, 10.0, 65).unwrap();
        let u = random_smooth_field(&mut rng, &g);
        assert_eq!(*u.values().last().unwrap(), 0.0);
    }
}
