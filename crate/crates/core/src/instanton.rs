//! Talenti instantons, the best Sobolev constant, and the threshold
//! estimates built from cut-off instantons.
//!
//! All instanton integrals use adaptive quadrature on the closed-form radial
//! integrands; the `eps -> 0` core is far below any practical uniform-grid
//! resolution. Only the Maxwell part of `J(t v_eps)`, which needs a solve,
//! goes through a grid, and that grid is required to resolve the core.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::functional::{FunctionalOptions, ReducedFunctional};
use crate::grid::{self, sphere_area, GridError, RadialField, RadialGrid};
use crate::params::{critical_exponent, KgmParams};
use crate::phi::{PhiBoundary, PhiError};
use crate::quadrature::{self, geometric_breakpoints};

const REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstantonError {
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("cutoff radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("grid spacing {spacing:e} does not resolve the core: need at most sqrt(eps)/8 = {required:e}")]
    UnderResolved { spacing: f64, required: f64 },
    #[error("grid with {0} nodes exceeds the node budget")]
    GridTooLarge(usize),
    #[error("grid radius {r_max} does not cover the cutoff support [0, {support}]")]
    GridTooSmall { r_max: f64, support: f64 },
    #[error("mu = exp(1/eps) is only evaluated for eps >= 1/30, got {0}")]
    MuRuleRange(f64),
    #[error("sweep needs at least {needed} epsilon values, got {got}")]
    SweepTooShort { needed: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Phi(#[from] PhiError),
}

/// `u_eps(r) = [N(N-2) eps]^{(N-2)/4} / (eps + r^2)^{(N-2)/2}`.
pub fn talenti_value(eps: f64, dimension: usize, r: f64) -> f64 {
    let n = dimension as f64;
    (n * (n - 2.0) * eps).powf((n - 2.0) / 4.0) / (eps + r * r).powf((n - 2.0) / 2.0)
}

/// `u_eps'(r) = -(N-2) r u_eps(r) / (eps + r^2)`.
pub fn talenti_derivative(eps: f64, dimension: usize, r: f64) -> f64 {
    -(dimension as f64 - 2.0) * r * talenti_value(eps, dimension, r) / (eps + r * r)
}

pub fn talenti(eps: f64, dimension: usize) -> impl Fn(f64) -> f64 {
    move |r| talenti_value(eps, dimension, r)
}

/// Cutoff equal to 1 on `[0, R]`, `1 - s^2 (3 - 2s)` with `s = (r-R)/R` on
/// `[R, 2R]`, and 0 beyond.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    if r <= radius {
        1.0
    } else if r >= 2.0 * radius {
        0.0
    } else {
        let s = (r - radius) / radius;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

pub fn cutoff_derivative(r: f64, radius: f64) -> f64 {
    if r <= radius || r >= 2.0 * radius {
        0.0
    } else {
        let s = (r - radius) / radius;
        -6.0 * s * (1.0 - s) / radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstantonParams {
    pub epsilon: f64,
    pub radius: f64,
    pub dimension: usize,
}

impl InstantonParams {
    pub fn new(epsilon: f64, radius: f64, dimension: usize) -> Result<Self, InstantonError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(InstantonError::Epsilon(epsilon));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(InstantonError::Radius(radius));
        }
        if dimension < 3 {
            return Err(InstantonError::Dimension(dimension));
        }
        Ok(Self { epsilon, radius, dimension })
    }

    /// `delta = (N-2)/2`.
    pub fn delta(&self) -> f64 {
        (self.dimension as f64 - 2.0) / 2.0
    }

    pub fn two_star(&self) -> f64 {
        critical_exponent(self.dimension)
    }

    /// `w_eps(r) = cutoff(r) u_eps(r)`.
    pub fn w(&self, r: f64) -> f64 {
        cutoff(r, self.radius) * talenti_value(self.epsilon, self.dimension, r)
    }

    pub fn w_derivative(&self, r: f64) -> f64 {
        let (e, n, rad) = (self.epsilon, self.dimension, self.radius);
        cutoff_derivative(r, rad) * talenti_value(e, n, r) + cutoff(r, rad) * talenti_derivative(e, n, r)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = geometric_breakpoints(0.0, self.radius, self.epsilon.sqrt());
        pts.push(2.0 * self.radius);
        let mut out: Vec<f64> = pts.into_iter().filter(|&x| x > a && x < b).collect();
        out.insert(0, a);
        out.push(b);
        out
    }

    /// `omega_{N-1} int_a^b f(r) r^{N-1} dr` (with `[a, b]` inside `[0, 2R]`).
    pub fn shell_integral(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let d = self.dimension as i32;
        let q = quadrature::integrate_breakpoints(|r| f(r) * r.powi(d - 1), &self.breakpoints(a, b), 0.0, REL_TOL);
        sphere_area(self.dimension) * q.value
    }

    /// `int_{B_2R} |grad w_eps|^2`.
    pub fn gradient_integral(&self) -> f64 {
        self.shell_integral(|r| self.w_derivative(r).powi(2), 0.0, 2.0 * self.radius)
    }

    /// `int_{B_2R} |w_eps|^k`.
    pub fn power_integral(&self, k: f64) -> f64 {
        self.shell_integral(|r| self.w(r).abs().powf(k), 0.0, 2.0 * self.radius)
    }

    /// `||w_eps||_{L^{2*}(B_2R)}`.
    pub fn critical_norm(&self) -> f64 {
        let s = self.two_star();
        self.power_integral(s).powf(1.0 / s)
    }

    /// `X_eps = ||grad v_eps||_2^2` with `v_eps = w_eps / ||w_eps||_{2*}`.
    pub fn x_eps(&self) -> f64 {
        self.gradient_integral() / self.critical_norm().powi(2)
    }
}

/// Nodal `w_eps` on a grid covering `[0, 2R]`.
pub fn cutoff_profile(p: &InstantonParams, g: &std::sync::Arc<RadialGrid>) -> Result<RadialField, InstantonError> {
    if g.r_max() < 2.0 * p.radius {
        return Err(InstantonError::GridTooSmall { r_max: g.r_max(), support: 2.0 * p.radius });
    }
    Ok(RadialField::new(g.clone(), g.nodes().iter().map(|&r| p.w(r)).collect())?)
}

/// `v_eps = w_eps / ||w_eps||_{2*}`, normalised in the grid's own quadrature.
pub fn normalized_profile(p: &InstantonParams, g: &std::sync::Arc<RadialGrid>) -> Result<RadialField, InstantonError> {
    let w = cutoff_profile(p, g)?;
    let norm = grid::norm_lp(&w, p.two_star());
    Ok(w.scaled(1.0 / norm))
}

/// Rayleigh quotient `||grad u||^2 / ||u||_{2*}^2` of the exact Talenti
/// profile on all of R^N, via `r = sqrt(eps) tan(theta)`.
pub fn talenti_quotient(eps: f64, dimension: usize) -> f64 {
    let s = critical_exponent(dimension);
    let d = dimension as i32;
    let se = eps.sqrt();
    let over_angle = |f: &dyn Fn(f64) -> f64| {
        quadrature::integrate_breakpoints(
            |th: f64| {
                let r = se * th.tan();
                let jac = se / th.cos().powi(2);
                f(r) * r.powi(d - 1) * jac
            },
            &[0.0, 0.25 * FRAC_PI_2, 0.5 * FRAC_PI_2, 0.75 * FRAC_PI_2, FRAC_PI_2],
            0.0,
            REL_TOL,
        )
        .value
    };
    let grad = over_angle(&|r| talenti_derivative(eps, dimension, r).powi(2));
    let crit = over_angle(&|r| talenti_value(eps, dimension, r).powf(s));
    let om = sphere_area(dimension);
    om * grad / (om * crit).powf(2.0 / s)
}

/// Best Sobolev constant `S`, attained by the Talenti profiles.
pub fn sobolev_constant(dimension: usize) -> f64 {
    talenti_quotient(1.0, dimension)
}

/// `S^{N/2} / N`.
pub fn threshold(s: f64, dimension: usize) -> f64 {
    s.powf(dimension as f64 / 2.0) / dimension as f64
}

/// Grid Rayleigh quotient `||grad u||^2 / ||u||_{2*}^2`.
pub fn rayleigh_quotient(u: &RadialField) -> f64 {
    let s = critical_exponent(u.grid().dimension());
    grid::norm_d12(u).powi(2) / grid::norm_lp(u, s).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XEpsFit {
    pub dimension: usize,
    pub delta: f64,
    pub sobolev_constant: f64,
    pub epsilon: Vec<f64>,
    pub x_eps: Vec<f64>,
    /// Fitted exponent of `X_eps - S` against `eps` (NaN below noise).
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    pub below_noise: bool,
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit `log(X_eps - S)` against `log eps`. Points whose excess is below the
/// quadrature noise floor (`1e-11 S`) are dropped.
pub fn x_eps_expansion(dimension: usize, radius: f64, eps_list: &[f64]) -> Result<XEpsFit, InstantonError> {
    let s = sobolev_constant(dimension);
    let params: Vec<InstantonParams> = eps_list
        .iter()
        .map(|&e| InstantonParams::new(e, radius, dimension))
        .collect::<Result<_, _>>()?;
    let x_eps: Vec<f64> = params.par_iter().map(|p| p.x_eps()).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = eps_list
        .iter()
        .zip(&x_eps)
        .filter(|(_, &x)| x - s > 1e-11 * s)
        .map(|(&e, &x)| (e.ln(), (x - s).ln()))
        .unzip();
    let below_noise = lx.len() < 2;
    let (slope, intercept) = if below_noise { (f64::NAN, f64::NAN) } else { linear_fit(&lx, &ly) };
    Ok(XEpsFit {
        dimension,
        delta: (dimension as f64 - 2.0) / 2.0,
        sobolev_constant: s,
        epsilon: eps_list.to_vec(),
        x_eps,
        slope,
        intercept,
        points_used: lx.len(),
        below_noise,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayOptions {
    /// Grid spacing for the Maxwell solve; default `sqrt(eps)/8`.
    pub spacing: Option<f64>,
    pub scan_points: usize,
    pub max_nodes: usize,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self { spacing: None, scan_points: 400, max_nodes: 2_000_001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaySup {
    pub t_eps: f64,
    pub sup_j: f64,
    pub r_eps: f64,
    pub x_eps: f64,
    pub nodes: usize,
    pub claim1_holds: bool,
}

/// The fibering map `t -> J(t v_eps)` for one instanton.
pub struct InstantonRay {
    x_eps: f64,
    l2: f64,
    lq: f64,
    profile: RadialField,
    func: ReducedFunctional,
    params: KgmParams,
}

impl InstantonRay {
    pub fn new(p: &InstantonParams, params: &KgmParams, options: &RayOptions) -> Result<Self, InstantonError> {
        let required = p.epsilon.sqrt() / 8.0;
        let h = options.spacing.unwrap_or(required);
        if h > required * (1.0 + 1e-12) {
            return Err(InstantonError::UnderResolved { spacing: h, required });
        }
        let r_max = 2.0 * p.radius;
        let nodes = ((r_max / h).ceil() as usize + 1).max(16);
        if nodes > options.max_nodes {
            return Err(InstantonError::GridTooLarge(nodes));
        }
        let g = RadialGrid::new(p.dimension, r_max, nodes)?;
        let norm = p.critical_norm();
        let profile = RadialField::new(g.clone(), g.nodes().iter().map(|&r| p.w(r) / norm).collect())?;
        let func = ReducedFunctional::with_options(
            *params,
            FunctionalOptions { phi_boundary: PhiBoundary::Robin, include_critical: true },
        );
        let l2 = p.power_integral(2.0) / norm.powi(2);
        let lq = p.power_integral(params.q()) / norm.powf(params.q());
        Ok(Self { x_eps: p.gradient_integral() / norm.powi(2), l2, lq, profile, func, params: *params })
    }

    pub fn nodes(&self) -> usize {
        self.profile.len()
    }

    pub fn x_eps(&self) -> f64 {
        self.x_eps
    }

    /// `r_eps = (X_eps + m0^2 ||v||_2^2)^{1/(2*-2)}`.
    pub fn r_eps(&self) -> f64 {
        let s = self.params.two_star();
        (self.x_eps + self.params.mass().powi(2) * self.l2).powf(1.0 / (s - 2.0))
    }

    /// `J(t v_eps)`: closed-form quadratic, power and critical terms, Maxwell
    /// part from the grid solve of `Phi[t v_eps]`.
    pub fn value(&self, t: f64) -> Result<f64, InstantonError> {
        let p = &self.params;
        let s = p.two_star();
        let maxwell = if p.omega() == 0.0 || t == 0.0 {
            0.0
        } else {
            self.func.energy(&self.profile.scaled(t))?.maxwell
        };
        Ok(0.5 * t * t * (self.x_eps + (p.mass().powi(2) - p.omega().powi(2)) * self.l2) + maxwell
            - p.mu() / p.q() * t.powf(p.q()) * self.lq
            - t.powf(s) / s)
    }

    /// Maximise over `t >= 0`: scan, then golden section on the bracket.
    pub fn maximize(&self, scan_points: usize) -> Result<RaySup, InstantonError> {
        let r_eps = self.r_eps();
        let mut t_hi = 2.0 * r_eps;
        let m = scan_points.max(8);
        let (ts, js) = loop {
            let ts: Vec<f64> = (0..=m).map(|i| t_hi * i as f64 / m as f64).collect();
            let js: Vec<f64> = ts.par_iter().map(|&t| self.value(t)).collect::<Result<_, _>>()?;
            let best = argmax(&js);
            if best < m || t_hi > 1e6 * r_eps.max(1.0) {
                break (ts, js);
            }
            t_hi *= 2.0;
        };
        let best = argmax(&js);
        let (mut a, mut b) = (ts[best.saturating_sub(1)], ts[(best + 1).min(m)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.value(c)?;
        let mut fd = self.value(d)?;
        for _ in 0..200 {
            if (b - a) <= 1e-13 * b.abs().max(1e-300) {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.value(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.value(d)?;
            }
        }
        let (t_eps, sup_j) = if fc > fd { (c, fc) } else { (d, fd) };
        let (t_eps, sup_j) = if js[best] > sup_j { (ts[best], js[best]) } else { (t_eps, sup_j) };
        Ok(RaySup {
            t_eps,
            sup_j,
            r_eps,
            x_eps: self.x_eps,
            nodes: self.nodes(),
            claim1_holds: t_eps <= r_eps * (1.0 + 1e-9),
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
        .0
}

/// `sup_{t >= 0} J(t v_eps)` with maximiser `t_eps` and the bound `r_eps`.
pub fn sup_j_over_ray(p: &InstantonParams, params: &KgmParams, options: &RayOptions) -> Result<RaySup, InstantonError> {
    if p.dimension != params.dimension() {
        return Err(InstantonError::Dimension(p.dimension));
    }
    InstantonRay::new(p, params, options)?.maximize(options.scan_points)
}

/// `int_0^{upper} t^{N-1} (1 + t^2)^{-a} dt`.
pub fn radial_integral(dimension: usize, a: f64, upper: f64) -> f64 {
    let d = dimension as i32;
    quadrature::integrate_breakpoints(
        |t| t.powi(d - 1) * (1.0 + t * t).powf(-a),
        &geometric_breakpoints(0.0, upper, 1.0),
        0.0,
        REL_TOL,
    )
    .value
}

/// `int_0^{R/sqrt(eps)} r^3/(1+r^2)^2 dr`.
pub fn closed_form_n4_log(eps: f64, radius: f64) -> f64 {
    0.5 * ((1.0 + radius * radius / eps).ln() + eps / (eps + radius * radius) - 1.0)
}

/// `int_0^{R/sqrt(eps)} r^3/(1+r^2)^4 dr`.
pub fn closed_form_n4_quartic(eps: f64, radius: f64) -> f64 {
    let r2 = radius * radius;
    1.0 / 12.0 - eps * eps * (eps + 3.0 * r2) / (12.0 * (eps + r2).powi(3))
}

/// `int_0^{R/sqrt(eps)} r^2/(1+r^2) dr`.
pub fn closed_form_n3(eps: f64, radius: f64) -> f64 {
    let x = radius / eps.sqrt();
    x - x.atan()
}

/// How `mu` is chosen along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// Use `mu` from the parameters.
    Fixed,
    /// `eps^{-1/2}` for `N = 3, q <= 4`; `exp(1/eps)` for `N = 5, q >= 8/3`;
    /// the parameters' `mu` otherwise.
    Rule,
}

/// `ln mu` for the given mode; the log keeps `exp(1/eps)` representable.
pub fn ln_mu(params: &KgmParams, eps: f64, mode: MuMode) -> Result<f64, InstantonError> {
    let (n, q) = (params.dimension(), params.q());
    Ok(match mode {
        MuMode::Rule if n == 3 && q <= 4.0 => -0.5 * eps.ln(),
        MuMode::Rule if n == 5 && q >= 8.0 / 3.0 => {
            if eps < 1.0 / 30.0 * (1.0 - 1e-12) {
                return Err(InstantonError::MuRuleRange(eps));
            }
            1.0 / eps
        }
        _ => params.mu().ln(),
    })
}

/// Whether a rule (rather than the fixed `mu`) applies to these parameters.
pub fn rule_applies(params: &KgmParams) -> bool {
    let (n, q) = (params.dimension(), params.q());
    (n == 3 && q <= 4.0) || (n == 5 && q >= 8.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IEps {
    pub value: f64,
    /// `eps^{-delta} int_{B_R} w^2`
    pub l2_term: f64,
    /// `eps^{-delta} mu int_{B_R} w^q`
    pub power_term: f64,
    /// `eps^{-delta} (int_{B_R} w^{4N/(N+2)})^{(N+2)/N}`
    pub norm_term: f64,
    pub ln_mu: f64,
}

/// `int_{B_R} u_eps^k` via `r = sqrt(eps) t`.
pub fn ball_power_integral(p: &InstantonParams, k: f64) -> f64 {
    let n = p.dimension as f64;
    let c = (n * (n - 2.0)).powf((n - 2.0) / 4.0);
    let upper = p.radius / p.epsilon.sqrt();
    sphere_area(p.dimension)
        * c.powf(k)
        * p.epsilon.powf(n / 2.0 - k * (n - 2.0) / 4.0)
        * radial_integral(p.dimension, k * (n - 2.0) / 2.0, upper)
}

/// `I_eps = eps^{-delta} [int_{B_R} (w^2 - mu w^q) + (int_{B_R} w^{4N/(N+2)})^{(N+2)/N}]`.
pub fn i_eps(p: &InstantonParams, params: &KgmParams, ln_mu: f64) -> IEps {
    let n = p.dimension as f64;
    let scale = p.epsilon.powf(-p.delta());
    let l2_term = scale * ball_power_integral(p, 2.0);
    let aq = ball_power_integral(p, params.q());
    let power_term = (ln_mu + aq.ln() - p.delta() * p.epsilon.ln()).exp();
    let norm_term = scale * ball_power_integral(p, 4.0 * n / (n + 2.0)).powf((n + 2.0) / n);
    IEps { value: l2_term - power_term + norm_term, l2_term, power_term, norm_term, ln_mu }
}

/// The annulus counterpart of `I_eps` on `B_2R \ B_R`, in terms of `v_eps`.
pub fn annulus_term(p: &InstantonParams, params: &KgmParams, ln_mu: f64) -> f64 {
    let n = p.dimension as f64;
    let norm = p.critical_norm();
    let (a, b) = (p.radius, 2.0 * p.radius);
    let v = |r: f64| p.w(r) / norm;
    let l2 = p.shell_integral(|r| v(r).powi(2), a, b);
    let lq = p.shell_integral(|r| v(r).powf(params.q()), a, b);
    let lp = p.shell_integral(|r| v(r).powf(4.0 * n / (n + 2.0)), a, b);
    let scale = p.epsilon.powf(-p.delta());
    scale * (l2 + lp.powf((n + 2.0) / n)) - (ln_mu + lq.ln() - p.delta() * p.epsilon.ln()).exp()
}

/// Divergence verdict for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim2Report {
    pub case: String,
    pub mu_mode: MuMode,
    pub epsilon: Vec<f64>,
    pub ln_mu: Vec<f64>,
    pub i_eps: Vec<f64>,
    pub annulus: Vec<f64>,
    /// Annulus quantity with the cutoff radius doubled.
    pub annulus_doubled: Vec<f64>,
    /// `(I_{k+1}/I_k)^{1/decades}` for steps inside the final two decades.
    pub decade_factors: Vec<f64>,
    pub decreasing: bool,
    pub rate_ok: bool,
    pub annulus_variation: f64,
    pub annulus_ok: bool,
    pub passed: bool,
    pub failure: Option<String>,
}

pub fn case_label(params: &KgmParams, mode: MuMode) -> String {
    let (n, q) = (params.dimension(), params.q());
    let rule = mode == MuMode::Rule && rule_applies(params);
    match n {
        3 if q > 4.0 => "N=3, 4<q<2*, fixed mu".into(),
        3 => format!("N=3, 2<q<=4, {}", if rule { "mu = eps^(-1/2)" } else { "fixed mu" }),
        4 => "N=4, fixed mu".into(),
        5 if q < 8.0 / 3.0 => "N=5, 2<q<8/3, fixed mu".into(),
        5 => format!("N=5, 8/3<=q<2*, {}", if rule { "mu = exp(1/eps)" } else { "fixed mu" }),
        _ => "N>=6, fixed mu".into(),
    }
}

/// Evaluate `I_eps` and the annulus quantity along a decreasing sweep and
/// apply the divergence proxy: in the final two decades every value is
/// negative, the sequence decreases, each per-decade growth factor is at
/// least 5, and the annulus quantity (doubled radius) varies by under 10%.
pub fn claim2_sweep(params: &KgmParams, eps_list: &[f64], radius: f64, mode: MuMode) -> Result<Claim2Report, InstantonError> {
    if eps_list.len() < 3 {
        return Err(InstantonError::SweepTooShort { needed: 3, got: eps_list.len() });
    }
    let n = params.dimension();
    let rows: Vec<(f64, f64, f64, f64)> = eps_list
        .par_iter()
        .map(|&e| {
            let lm = ln_mu(params, e, mode)?;
            let p = InstantonParams::new(e, radius, n)?;
            let p2 = InstantonParams::new(e, 2.0 * radius, n)?;
            Ok((lm, i_eps(&p, params, lm).value, annulus_term(&p, params, lm), annulus_term(&p2, params, lm)))
        })
        .collect::<Result<_, InstantonError>>()?;
    let ln_mus: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let annulus: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let annulus_doubled: Vec<f64> = rows.iter().map(|r| r.3).collect();

    let last = *eps_list.last().unwrap();
    let start = eps_list.iter().position(|&e| e <= 100.0 * last * (1.0 + 1e-9)).unwrap_or(0);
    let window = start..eps_list.len();
    let mut failure = None;

    let decreasing = values[window.clone()].windows(2).all(|w| w[1] < w[0]);
    let mut decade_factors = Vec::new();
    for k in start..eps_list.len() - 1 {
        let decades = (eps_list[k] / eps_list[k + 1]).log10();
        let f = if values[k] < 0.0 && values[k + 1] < 0.0 {
            (values[k + 1] / values[k]).powf(1.0 / decades)
        } else {
            f64::NAN
        };
        decade_factors.push(f);
    }
    let negative = values[window.clone()].iter().all(|&v| v < 0.0);
    let rate_ok = negative && !decade_factors.is_empty() && decade_factors.iter().all(|&f| f >= 5.0);
    if !decreasing {
        failure = Some(format!("I_eps not decreasing within eps in [{:e}, {:e}]", eps_list[start], last));
    } else if !rate_ok {
        let (k, f) = decade_factors
            .iter()
            .enumerate()
            .find(|(_, f)| !(**f >= 5.0))
            .map(|(i, f)| (start + i, *f))
            .unwrap_or((start, f64::NAN));
        failure = Some(format!(
            "growth factor {f:.3} per decade (need >= 5) between eps = {:e} and {:e}",
            eps_list[k],
            eps_list[(k + 1).min(eps_list.len() - 1)]
        ));
    }
    let ann = &annulus_doubled[window];
    let amax = ann.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let spread = ann.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ann.iter().cloned().fold(f64::INFINITY, f64::min);
    let annulus_variation = if amax > 0.0 { spread / amax } else { 0.0 };
    let annulus_ok = annulus_variation < 0.1;
    if failure.is_none() && !annulus_ok {
        failure = Some(format!("annulus quantity varies by {:.1}% (need < 10%)", 100.0 * annulus_variation));
    }
    Ok(Claim2Report {
        case: case_label(params, mode),
        mu_mode: mode,
        epsilon: eps_list.to_vec(),
        ln_mu: ln_mus,
        i_eps: values,
        annulus,
        annulus_doubled,
        decade_factors,
        decreasing,
        rate_ok,
        annulus_variation,
        annulus_ok,
        passed: decreasing && rate_ok && annulus_ok,
        failure,
    })
}

/// `eps = 10^{-a}, ..., 10^{-b}` at `per_decade` points per decade.
pub fn eps_decades(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((b - a) * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| 10f64.powf(-(a + i as f64 / per_decade as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstantonRow {
    pub epsilon: f64,
    pub x_eps: f64,
    pub sup_j: f64,
    pub t_eps: f64,
    pub r_eps: f64,
    pub i_eps: f64,
    pub annulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstantonReport {
    pub dimension: usize,
    pub radius: f64,
    pub delta: f64,
    pub s_estimate: f64,
    pub threshold: f64,
    pub rows: Vec<InstantonRow>,
    pub min_sup_j: f64,
    pub threshold_margin: f64,
    pub x_fit: XEpsFit,
    pub claim2: Claim2Report,
    pub verdicts: Vec<Verdict>,
}

/// Full sweep: `X_eps`, `sup J`, Claim-1 bound, `I_eps`, annulus, verdicts.
pub fn instanton_sweep(params: &KgmParams, eps_list: &[f64], radius: f64, mode: MuMode) -> Result<InstantonReport, InstantonError> {
    let n = params.dimension();
    let s = sobolev_constant(n);
    let thr = threshold(s, n);
    let x_fit = x_eps_expansion(n, radius, eps_list)?;
    let ray = RayOptions::default();
    let sups: Vec<RaySup> = eps_list
        .iter()
        .map(|&e| sup_j_over_ray(&InstantonParams::new(e, radius, n)?, params, &ray))
        .collect::<Result<_, _>>()?;
    let claim2 = claim2_sweep(params, eps_list, radius, mode)?;
    let rows: Vec<InstantonRow> = eps_list
        .iter()
        .enumerate()
        .map(|(k, &e)| InstantonRow {
            epsilon: e,
            x_eps: x_fit.x_eps[k],
            sup_j: sups[k].sup_j,
            t_eps: sups[k].t_eps,
            r_eps: sups[k].r_eps,
            i_eps: claim2.i_eps[k],
            annulus: claim2.annulus[k],
        })
        .collect();
    let min_sup_j = sups.iter().map(|r| r.sup_j).fold(f64::INFINITY, f64::min);

    let mut verdicts = Vec::new();
    let x_ok = x_fit.x_eps.iter().all(|&x| x >= s * (1.0 - 1e-12));
    verdicts.push(Verdict {
        name: "x_eps_above_s".into(),
        passed: x_ok,
        detail: format!("min X_eps - S = {:e}", x_fit.x_eps.iter().map(|x| x - s).fold(f64::INFINITY, f64::min)),
    });
    verdicts.push(Verdict {
        name: "x_eps_rate".into(),
        passed: !x_fit.below_noise && x_fit.slope >= x_fit.delta - 0.1,
        detail: format!("fitted slope {:.4} vs delta {:.1} ({} points)", x_fit.slope, x_fit.delta, x_fit.points_used),
    });
    verdicts.push(Verdict {
        name: "claim1_t_le_r".into(),
        passed: sups.iter().all(|r| r.claim1_holds),
        detail: format!(
            "max t_eps / r_eps = {:.6}",
            sups.iter().map(|r| r.t_eps / r.r_eps).fold(0.0, f64::max)
        ),
    });
    verdicts.push(Verdict {
        name: "threshold".into(),
        passed: min_sup_j < thr,
        detail: format!("min sup J = {min_sup_j:.8}, threshold S^(N/2)/N = {thr:.8}"),
    });
    verdicts.push(Verdict {
        name: "claim2_divergence".into(),
        passed: claim2.passed,
        detail: claim2.failure.clone().unwrap_or_else(|| claim2.case.clone()),
    });

    Ok(InstantonReport {
        dimension: n,
        radius,
        delta: (n as f64 - 2.0) / 2.0,
        s_estimate: s,
        threshold: thr,
        rows,
        min_sup_j,
        threshold_margin: thr - min_sup_j,
        x_fit,
        claim2,
        verdicts,
    })
}
