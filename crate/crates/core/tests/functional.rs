mod common;

use std::sync::Arc;

use kgm_core::functional::{self, FunctionalOptions, ReducedFunctional};
use kgm_core::grid::{self, RadialField, RadialGrid};
use kgm_core::params::KgmParams;
use kgm_core::phi::PhiBoundary;
use kgm_core::saddle;
use proptest::prelude::*;

fn bumps(g: &Arc<RadialGrid>, seed: u64) -> RadialField {
    let b = common::Bumps::new(seed, g.r_max());
    RadialField::from_fn(g.clone(), |r| b.eval(r))
}

/// Continuum value of the truncated functional for `u = exp(-r^2)`, with
/// `phi(r_max) = 0`: Maxwell potential from two dense solves combined by
/// Richardson extrapolation, every integral by adaptive Simpson.
fn gaussian_oracle(n_dim: usize, r_max: f64, p: &KgmParams) -> f64 {
    let u = |r: f64| (-r * r).exp();
    let du = |r: f64| -2.0 * r * (-r * r).exp();
    let solve = |nodes: usize| {
        let r = common::nodes(r_max, nodes);
        let vals: Vec<f64> = r.iter().map(|&x| u(x)).collect();
        common::dense_maxwell(n_dim, r_max, &vals, p.omega(), false)
    };
    let coarse = solve(1025);
    let fine = solve(2049);
    let extrapolated: Vec<f64> = coarse.iter().enumerate().map(|(i, c)| (4.0 * fine[2 * i] - c) / 3.0).collect();
    let r = common::nodes(r_max, 1025);
    let phi = common::cubic_interpolant(&r, &extrapolated);

    let area = common::sphere_area(n_dim);
    let d = n_dim as f64;
    let s = 2.0 * d / (d - 2.0);
    let cuts = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, r_max];
    let int = |f: &dyn Fn(f64) -> f64| area * common::piecewise_simpson(&|x: f64| f(x) * x.powf(d - 1.0), &cuts, 1e-13);
    let kinetic = 0.5 * int(&|x| du(x) * du(x));
    let mass = 0.5 * (p.mass().powi(2) - p.omega().powi(2)) * int(&|x| u(x) * u(x));
    // 1/2 int |grad Phi|^2 + 1/2 int Phi^2 u^2 = -omega/2 int u^2 Phi.
    let maxwell = -0.5 * p.omega() * int(&|x| u(x) * u(x) * phi(x));
    let power = p.mu() / p.q() * int(&|x| u(x).powf(p.q()));
    let critical = int(&|x| u(x).powf(s)) / s;
    kinetic + mass + maxwell - power - critical
}

#[test]
fn gaussian_energy_matches_independent_pipeline() {
    let p = KgmParams::new(3, 1.0, 0.5, 1.0, 4.0).unwrap();
    let oracle = gaussian_oracle(3, 20.0, &p);
    let value = |nodes: usize| {
        let g = RadialGrid::new(3, 20.0, nodes).unwrap();
        functional::eval_j(&RadialField::from_fn(g, |r| (-r * r).exp()), &p).unwrap().total
    };
    let (coarse, fine) = (value(2049), value(4097));
    let rel = |x: f64| (x - oracle).abs() / oracle.abs();
    // Second-order scheme: a few 1e-6 at n = 2049, and the extrapolated
    // value lands on the continuum oracle.
    assert!(rel(coarse) < 2e-5, "n=2049: {:e}", rel(coarse));
    assert!(rel(fine) < rel(coarse) / 3.0);
    let richardson = (4.0 * fine - coarse) / 3.0;
    assert!(rel(richardson) < 1e-6, "extrapolated: {:e}", rel(richardson));
}

#[test]
fn zero_field_has_zero_energy_and_gradient() {
    let p = KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap();
    let g = RadialGrid::new(4, 10.0, 257).unwrap();
    let z = RadialField::zeros(g);
    let e = functional::eval_j(&z, &p).unwrap();
    assert_eq!(e.kinetic, 0.0);
    assert_eq!(e.mass_term, 0.0);
    assert_eq!(e.maxwell, 0.0);
    assert_eq!(e.power_term, 0.0);
    assert_eq!(e.critical_term, 0.0);
    assert_eq!(e.total, 0.0);
    let grad = functional::grad_j(&z, &p).unwrap();
    assert!(grad.values().iter().all(|&x| x == 0.0));
}

#[test]
fn zero_frequency_reduces_to_the_uncoupled_energy() {
    let p = KgmParams::control(3, 1.0, 0.0, 1.0, 4.0).unwrap();
    let g = RadialGrid::new(3, 10.0, 1025).unwrap();
    let u = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
    let e = functional::eval_j(&u, &p).unwrap();
    assert_eq!(e.maxwell, 0.0);
    let (faces, w) = common::fv_coefficients(3, 10.0, 1025);
    let v = u.values();
    let kinetic = 0.5 * faces.iter().enumerate().map(|(i, a)| a * (v[i + 1] - v[i]).powi(2)).sum::<f64>();
    let lumped = |k: f64| w.iter().zip(v).map(|(w, x)| w * x.abs().powf(k)).sum::<f64>();
    let expect = kinetic + 0.5 * lumped(2.0) - lumped(4.0) / 4.0 - lumped(6.0) / 6.0;
    assert!((e.total - expect).abs() < 1e-12 * expect.abs());
}

#[test]
fn breakdown_parts_are_consistent() {
    let p = KgmParams::new(5, 2.0, 0.5, 1.5, 3.0).unwrap();
    let g = RadialGrid::new(5, 10.0, 513).unwrap();
    for seed in 0..10 {
        let e = functional::eval_j(&bumps(&g, seed), &p).unwrap();
        assert!(e.kinetic >= 0.0 && e.power_term >= 0.0 && e.critical_term >= 0.0 && e.maxwell >= 0.0);
        let sum = e.kinetic + e.mass_term + e.maxwell - e.power_term - e.critical_term;
        assert!((e.total - sum).abs() <= 1e-12 * (1.0 + sum.abs()));
    }
}

#[test]
fn directional_derivatives_match_central_differences() {
    let cases = [
        (KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap(), 3usize),
        (KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap(), 4usize),
    ];
    for (p, n) in cases {
        let g = RadialGrid::new(n, 10.0, 513).unwrap();
        let f = ReducedFunctional::new(p);
        for k in 0..20u64 {
            let u = bumps(&g, 100 * n as u64 + k);
            let v = bumps(&g, 7000 + 100 * n as u64 + k);
            let analytic = f.gradient(&u).unwrap().pairing(&v);
            // Independent central difference at the optimal step for
            // double precision.
            let t = f64::EPSILON.cbrt() * u.max_abs().max(1.0) / v.max_abs();
            let jp = f.value(&u.combine(1.0, &v, t).unwrap()).unwrap();
            let jm = f.value(&u.combine(1.0, &v, -t).unwrap()).unwrap();
            let central = (jp - jm) / (2.0 * t);
            let rel = (central - analytic).abs() / analytic.abs();
            assert!(rel < 1e-5, "N={n} pair {k}: {rel:e}");
            let check = f.check_direction(&u, &v, Some(t)).unwrap();
            assert_eq!(check.analytic, analytic);
            assert!(check.relative_error < 1e-5);
        }
    }
}

#[test]
fn weak_pairing_matches_quadrature_to_second_order() {
    let p = KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap();
    let mismatch = |nodes: usize| {
        let g = RadialGrid::new(3, 10.0, nodes).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| 0.8 * (-r * r / 2.0).exp() * (1.0 - r / 10.0));
        let v = RadialField::from_fn(g.clone(), |r| (-(r - 1.0).powi(2)).exp() * (1.0 - r / 10.0));
        let grad = ReducedFunctional::new(p).gradient(&u).unwrap();
        let product = RadialField::new(g, grad.field.values().iter().zip(v.values()).map(|(a, b)| a * b).collect()).unwrap();
        (grad.pairing(&v) - grid::integrate(&product)).abs()
    };
    let (a, b) = (mismatch(513), mismatch(1025));
    assert!(a < 1e-3, "{a:e}");
    assert!(a / b > 3.0, "ratio {}", a / b);
}

#[test]
fn small_amplitude_gradient_is_the_linear_operator() {
    let p = KgmParams::control(4, 2.0, 1.0, 0.0, 3.0).unwrap();
    let f = ReducedFunctional::with_options(p, FunctionalOptions { phi_boundary: PhiBoundary::Dirichlet, include_critical: false });
    let g = RadialGrid::new(4, 10.0, 513).unwrap();
    let u = bumps(&g, 42).scaled(1e-4 / bumps(&g, 42).max_abs());
    let raw = f.gradient(&u).unwrap().raw;
    let (faces, w) = common::fv_coefficients(4, 10.0, 513);
    let v = u.values();
    let n = v.len();
    let mut linear = vec![0.0; n];
    for (i, a) in faces.iter().enumerate() {
        linear[i] -= a * (v[i + 1] - v[i]);
        linear[i + 1] += a * (v[i + 1] - v[i]);
    }
    for i in 0..n {
        linear[i] += w[i] * (4.0 - 1.0) * v[i];
    }
    linear[n - 1] = 0.0;
    let norm = |x: &[f64]| x.iter().zip(&w).map(|(a, w)| a * a / w).sum::<f64>().sqrt();
    let diff: Vec<f64> = raw.iter().zip(&linear).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) < 1e-3 * norm(&linear));
}

#[test]
fn nehari_pairing_decomposes_term_by_term() {
    let p = KgmParams::new(3, 1.0, 0.5, 2.0, 4.5).unwrap();
    let g = RadialGrid::new(3, 10.0, 1025).unwrap();
    let f = ReducedFunctional::new(p);
    let (_, w) = common::fv_coefficients(3, 10.0, 1025);
    for seed in 0..8 {
        let u = bumps(&g, 300 + seed);
        let e = f.energy(&u).unwrap();
        let grad = f.gradient(&u).unwrap();
        let (v, phi) = (u.values(), grad.phi.values());
        let coupling: f64 = (0..v.len()).map(|i| w[i] * v[i] * v[i] * (2.0 * p.omega() * phi[i] + phi[i] * phi[i])).sum();
        let pairing = grad.pairing(&u);
        let expected = 2.0 * e.kinetic + 2.0 * e.mass_term - coupling - p.q() * e.power_term - p.two_star() * e.critical_term;
        assert!((pairing - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "{pairing} vs {expected}");
        // q J(u) - <J'(u), u>, with every term kept.
        let q = p.q();
        let combination = (q / 2.0 - 1.0) * 2.0 * (e.kinetic + e.mass_term)
            + q * e.maxwell
            + coupling
            + (p.two_star() - q) * e.critical_term;
        let direct = q * e.total - pairing;
        assert!((combination - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "{combination} vs {direct}");
    }
}

#[test]
fn ray_has_one_interior_maximum_then_decreases() {
    let p = KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap();
    let g = RadialGrid::new(4, 10.0, 513).unwrap();
    let u = RadialField::from_fn(g, |r| (-r * r).exp());
    let ts: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
    let js = functional::eval_j_along_ray(&u, &ts, &p).unwrap();
    assert_eq!(js[0], 0.0);
    let peak = (0..js.len()).max_by(|&a, &b| js[a].total_cmp(&js[b])).unwrap();
    assert!(peak > 0 && peak < js.len() - 1);
    assert!(js[..=peak].windows(2).all(|w| w[1] > w[0]));
    assert!(js[peak..].windows(2).all(|w| w[1] < w[0]));
    assert!(*js.last().unwrap() < 0.0);
    // Each point solves its own potential: Phi[t u] is not t Phi[u].
    let f = ReducedFunctional::new(p);
    let u2 = u.scaled(2.0);
    assert_eq!(f.value(&u2).unwrap(), js[40]);
}

#[test]
fn mountain_pass_geometry_on_random_directions() {
    let p = KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap();
    let g = RadialGrid::new(3, 10.0, 513).unwrap();
    let f = ReducedFunctional::new(p);
    let dirs: Vec<RadialField> = (0..60).map(|k| bumps(&g, 900 + k)).collect();
    for rho in [0.01, 0.05] {
        let alpha = saddle::sphere_minimum(&f, &dirs, rho).unwrap();
        assert!(alpha > 0.0, "rho {rho}: {alpha}");
    }
    for d in dirs.iter().take(10) {
        let (far, trace) = saddle::find_endpoint(&f, d).unwrap();
        assert!(f.value(&far).unwrap() < 0.0);
        assert!(trace.last().unwrap().1 < 0.0);
    }
}

#[test]
fn two_field_energy_is_stationary_at_the_potential() {
    let p = KgmParams::new(4, 2.0, 1.0, 1.0, 3.0).unwrap();
    let g = RadialGrid::new(4, 8.0, 257).unwrap();
    let f = ReducedFunctional::new(p);
    let u = bumps(&g, 5);
    let phi = f.gradient(&u).unwrap().phi;
    let j = f.value(&u).unwrap();
    assert!((f.two_field_energy(&u, &phi) - j).abs() < 1e-10 * (1.0 + j.abs()));
    let bump = RadialField::from_fn(g, |r| (-(r - 2.0).powi(2)).exp() * (1.0 - r / 8.0));
    let t = 1e-4;
    let plus = f.two_field_energy(&u, &phi.combine(1.0, &bump, t).unwrap());
    let minus = f.two_field_energy(&u, &phi.combine(1.0, &bump, -t).unwrap());
    let slope = (plus - minus) / (2.0 * t);
    assert!(slope.abs() < 1e-6 * (1.0 + j.abs()), "{slope:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_even(seed in any::<u64>(), n in 3usize..=6) {
        let p = KgmParams::new(n, 2.0, 0.5, 1.0, 2.5).unwrap();
        let g = RadialGrid::new(n, 8.0, 129).unwrap();
        let u = bumps(&g, seed);
        let a = functional::eval_j(&u, &p).unwrap().total;
        let b = functional::eval_j(&u.scaled(-1.0), &p).unwrap().total;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gradient_is_odd(seed in any::<u64>()) {
        let p = KgmParams::new(3, 1.0, 0.5, 1.0, 2.5).unwrap();
        let g = RadialGrid::new(3, 8.0, 129).unwrap();
        let u = bumps(&g, seed);
        let a = functional::grad_j(&u, &p).unwrap();
        let b = functional::grad_j(&u.scaled(-1.0), &p).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert_eq!(*x, -*y);
        }
    }
}
