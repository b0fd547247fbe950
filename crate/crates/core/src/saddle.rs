//! Mountain-pass critical points of the reduced energy.
//!
//! Pipeline: admissibility gate, endpoint search along a seed ray, a
//! discretised path from `0` to the endpoint deformed by descent of its
//! highest knot (H1-preconditioned, arclength re-spacing), then damped
//! Newton on the coupled `(u, phi)` system. In the regimes that need a
//! large `mu`, the solve starts at an inflated `mu` and continues down.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::functional::{weighted_norm, EnergyBreakdown, FunctionalOptions, ReducedFunctional};
use crate::grid::{self, GridError, RadialField, RadialGrid};
use crate::instanton;
use crate::linalg::{self, BandMatrix, LinalgError};
use crate::params::{classify, AdmissibilityVerdict, KgmParams, MuRequirement, ParamError};
use crate::phi::{PhiBoundary, PhiDiagnostics, PhiError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTrace {
    pub path_level_history: Vec<f64>,
    pub newton_history: Vec<f64>,
    pub continuation: Vec<ContinuationStep>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("parameters fail the existence hypotheses: {explanation}")]
    Refused { explanation: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error("seed shape is identically zero")]
    ZeroSeed,
    #[error("no point with negative energy found along the seed ray (t up to {t_max:e})")]
    EndpointNotFound { t_max: f64 },
    #[error("solution collapsed to the trivial critical point (max |u| = {max_abs:e})")]
    Trivial { max_abs: f64 },
    #[error("Newton Jacobian singular at iteration {iteration}: smallest relative pivot {min_pivot:e}")]
    Singular { iteration: usize, min_pivot: f64 },
    #[error("Newton diverged at iteration {iteration} after maximal damping (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },
    #[error("no convergence in {stage} (residual {residual:e}, smallest mu reached {smallest_mu:e})")]
    NoConvergence {
        stage: String,
        residual: f64,
        smallest_mu: f64,
        trace: Box<SolverTrace>,
    },
}

impl From<LinalgError> for SolveError {
    fn from(e: LinalgError) -> Self {
        SolveError::Phi(PhiError::Linalg(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    pub r_max: f64,
    pub nodes: usize,
    /// Weighted-L2 residual tolerance for Newton.
    pub tol: f64,
    pub knots: usize,
    pub mu_factor: f64,
    pub min_mu_steps: usize,
    pub phi_boundary: PhiBoundary,
    pub override_admissibility: bool,
    /// Relative preconditioned gradient at the highest knot that ends the
    /// path stage.
    pub path_tol: f64,
    pub max_path_steps: usize,
    pub max_newton_iterations: usize,
    /// Width of the Gaussian seed `exp(-(r/w)^2)`.
    pub seed_width: f64,
    pub check_truncation: bool,
    pub check_refinement: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            r_max: 20.0,
            nodes: 32769,
            tol: 1e-8,
            knots: 11,
            mu_factor: 0.8,
            min_mu_steps: 20,
            phi_boundary: PhiBoundary::Robin,
            override_admissibility: false,
            path_tol: 1e-3,
            max_path_steps: 2000,
            max_newton_iterations: 50,
            seed_width: 1.0,
            check_truncation: true,
            check_refinement: true,
        }
    }
}

/// Discretised path from `0` to an endpoint of negative energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub endpoints: (RadialField, RadialField),
    /// All knots, endpoints included.
    pub knots: Vec<RadialField>,
    pub energies: Vec<f64>,
    pub level_estimate: f64,
    pub max_index: usize,
    pub step_size: f64,
    /// Relative preconditioned gradient norm at the highest knot.
    pub relative_gradient: f64,
    pub converged: bool,
    pub stagnated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub mu: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub r_max: f64,
    pub nodes: usize,
    pub energy: f64,
    pub relative_change: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementCheck {
    pub nodes: usize,
    /// Residual of the interpolated coarse profile on the fine grid.
    pub interpolated_residual: f64,
    /// Residual after re-solving on the fine grid.
    pub residual: f64,
    pub energy: f64,
}

/// Numerical mountain-pass geometry: `J >= alpha` on the sphere of radius
/// `rho` (sampled) and `J(u1) < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryCheck {
    pub rho: f64,
    pub alpha: f64,
    pub directions: usize,
    pub endpoint_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub profile: RadialField,
    pub phi: RadialField,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub min_pivot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    pub profile: RadialField,
    pub phi: RadialField,
    pub energy: f64,
    pub breakdown: EnergyBreakdown,
    pub residual: f64,
    /// Newton iterations of the final solve.
    pub iterations: usize,
    pub path_steps: usize,
    pub path_level_history: Vec<f64>,
    pub newton_history: Vec<f64>,
    pub sobolev_constant: f64,
    pub threshold: f64,
    pub below_threshold: bool,
    pub verdict: AdmissibilityVerdict,
    pub admissibility_overridden: bool,
    pub continuation: Vec<ContinuationStep>,
    pub smallest_mu: f64,
    pub phi_diagnostics: PhiDiagnostics,
    pub geometry: GeometryCheck,
    pub truncation: Option<TruncationCheck>,
    pub refinement: Option<RefinementCheck>,
}

/// `u^T (K + W) u`, the discrete H1 inner product form.
pub fn h1_form(g: &RadialGrid, u: &[f64], v: &[f64]) -> f64 {
    let faces = g.face_coefficients();
    let w = g.lumped_weights();
    let grad: f64 = faces
        .iter()
        .enumerate()
        .map(|(i, a)| a * (u[i + 1] - u[i]) * (v[i + 1] - v[i]))
        .sum();
    grad + w.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum::<f64>()
}

pub fn h1_norm(u: &RadialField) -> f64 {
    h1_form(u.grid(), u.values(), u.values()).max(0.0).sqrt()
}

/// Solve `(K + W) p = raw` with `p(r_max) = 0`: the H1 Riesz representative.
fn precondition(g: &RadialGrid, raw: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = g.len();
    let faces = g.face_coefficients();
    let mut diag = g.lumped_weights().to_vec();
    for (i, a) in faces.iter().enumerate() {
        diag[i] += a;
        diag[i + 1] += a;
    }
    let off: Vec<f64> = faces.iter().map(|a| -a).collect();
    let m = n - 1;
    let x = linalg::solve_symmetric_tridiagonal(&diag[..m], &off[..m - 1], &raw[..m])?;
    let mut p = vec![0.0; n];
    p[..m].copy_from_slice(&x);
    Ok(p)
}

/// Gaussian seed `exp(-(r/w)^2)`, zero at `r_max`.
pub fn gaussian_seed(g: &Arc<RadialGrid>, width: f64) -> RadialField {
    let r_max = g.r_max();
    RadialField::from_fn(g.clone(), |r| if r >= r_max { 0.0 } else { (-(r / width).powi(2)).exp() })
}

/// Double `t` until `J(t seed) < 0`; returns `t seed` and the `(t, J)` trace.
pub fn find_endpoint(func: &ReducedFunctional, seed: &RadialField) -> Result<(RadialField, Vec<(f64, f64)>), SolveError> {
    if seed.max_abs() == 0.0 {
        return Err(SolveError::ZeroSeed);
    }
    let mut t = 1.0;
    let mut trace = Vec::new();
    for _ in 0..200 {
        let u = seed.scaled(t);
        let j = func.value(&u)?;
        trace.push((t, j));
        if j < 0.0 {
            return Ok((u, trace));
        }
        t *= 2.0;
    }
    Err(SolveError::EndpointNotFound { t_max: t })
}

fn highest_interior(energies: &[f64]) -> usize {
    let k = energies.len();
    let top = energies[1..k - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Lowest index among knots within 1e-12 of the maximum.
    (1..k - 1)
        .find(|&i| energies[i] >= top - 1e-12 * top.abs().max(1.0))
        .unwrap_or(1)
}

fn evaluate_all(func: &ReducedFunctional, knots: &[RadialField]) -> Result<Vec<f64>, SolveError> {
    knots
        .par_iter()
        .map(|u| func.value(u).map_err(SolveError::from))
        .collect()
}

fn path_length(g: &RadialGrid, knots: &[RadialField]) -> f64 {
    knots
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].values().iter().zip(w[0].values()).map(|(a, b)| a - b).collect();
            h1_form(g, &d, &d).max(0.0).sqrt()
        })
        .sum()
}

/// Re-space knots to equal H1 arclength along the polygonal path.
pub fn respace(knots: &[RadialField]) -> Vec<RadialField> {
    let k = knots.len();
    let g = knots[0].grid().clone();
    let seg: Vec<f64> = knots
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].values().iter().zip(w[0].values()).map(|(a, b)| a - b).collect();
            h1_form(&g, &d, &d).max(0.0).sqrt()
        })
        .collect();
    let total: f64 = seg.iter().sum();
    if total == 0.0 {
        return knots.to_vec();
    }
    let mut cum = vec![0.0];
    for s in &seg {
        cum.push(cum.last().unwrap() + s);
    }
    let mut out = Vec::with_capacity(k);
    out.push(knots[0].clone());
    let mut j = 0;
    for m in 1..k - 1 {
        let target = total * m as f64 / (k - 1) as f64;
        while j + 1 < k - 1 && cum[j + 1] < target {
            j += 1;
        }
        let s = if seg[j] > 0.0 { (target - cum[j]) / seg[j] } else { 0.0 };
        let s = s.clamp(0.0, 1.0);
        out.push(knots[j].combine(1.0 - s, &knots[j + 1], s).expect("same grid"));
    }
    out.push(knots[k - 1].clone());
    out
}

impl PathState {
    /// Straight segment `t u1`, `t = 0, 1/(k-1), ..., 1`.
    pub fn straight(func: &ReducedFunctional, u1: &RadialField, knots: usize) -> Result<Self, SolveError> {
        let k = knots.max(3);
        let list: Vec<RadialField> = (0..k).map(|i| u1.scaled(i as f64 / (k - 1) as f64)).collect();
        let energies = evaluate_all(func, &list)?;
        let max_index = highest_interior(&energies);
        Ok(Self {
            endpoints: (list[0].clone(), list[k - 1].clone()),
            level_estimate: energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            knots: list,
            energies,
            max_index,
            step_size: 1.0,
            relative_gradient: f64::INFINITY,
            converged: false,
            stagnated: false,
        })
    }
}

/// One deformation step: move the highest knot along the H1-preconditioned
/// negative gradient with its component along the path tangent removed (so
/// the knot cannot slide down the path), re-space by arclength, and
/// backtrack until the re-spaced level does not exceed the input's.
pub fn mountain_pass_step(state: &PathState, func: &ReducedFunctional, path_tol: f64) -> Result<PathState, SolveError> {
    let k = state.max_index;
    let u = &state.knots[k];
    let g = u.grid().clone();
    let grad = func.gradient(u)?;
    let p = precondition(&g, &grad.raw)?;
    let pn2: f64 = grad.raw.iter().zip(&p).map(|(a, b)| a * b).sum();
    let un = h1_norm(u);
    let relative = pn2.max(0.0).sqrt() / un.max(f64::MIN_POSITIVE);
    let mut next = state.clone();
    next.relative_gradient = relative;
    if relative < path_tol {
        next.converged = true;
        return Ok(next);
    }

    let tangent: Vec<f64> = state.knots[k + 1].values().iter().zip(state.knots[k - 1].values()).map(|(a, b)| a - b).collect();
    let tn2 = h1_form(&g, &tangent, &tangent);
    let mut d = p;
    if tn2 > 0.0 {
        let c = h1_form(&g, &d, &tangent) / tn2;
        for (x, t) in d.iter_mut().zip(&tangent) {
            *x -= c * t;
        }
    }
    // Descent rate of J along -d.
    let dn2 = h1_form(&g, &d, &d);
    if dn2.max(0.0).sqrt() < path_tol * un {
        next.stagnated = true;
        return Ok(next);
    }
    let d = RadialField::new(g.clone(), d)?;
    // Trust region: the knot moves at most half the mean knot spacing.
    let spacing = path_length(&g, &state.knots) / (state.knots.len() - 1) as f64;
    let mut s = state.step_size.min(0.5 * spacing / dn2.sqrt());
    let j0 = state.energies[k];
    loop {
        let trial = u.combine(1.0, &d, -s)?;
        let jt = func.value(&trial)?;
        if jt <= j0 - 1e-4 * s * dn2 {
            let mut moved = state.knots.clone();
            moved[k] = trial;
            let respaced = respace(&moved);
            let energies = evaluate_all(func, &respaced)?;
            let level = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (knots, energies, level) = if level <= state.level_estimate {
                (respaced, energies, level)
            } else {
                let mut energies = state.energies.clone();
                energies[k] = jt;
                let level = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (moved, energies, level)
            };
            next.max_index = highest_interior(&energies);
            next.knots = knots;
            next.energies = energies;
            next.level_estimate = level;
            next.step_size = (2.0 * s).min(1.0);
            return Ok(next);
        }
        s *= 0.5;
        if s < 1e-12 {
            next.stagnated = true;
            return Ok(next);
        }
    }
}

fn assemble_jacobian(func: &ReducedFunctional, u: &[f64], phi: &[f64], g: &RadialGrid) -> BandMatrix {
    let n = g.len();
    let p = func.params();
    let faces = g.face_coefficients();
    let w = g.lumped_weights();
    let m2 = p.mass().powi(2);
    let s = p.two_star();
    let critical = func.options().include_critical;
    let robin = func.options().phi_boundary == PhiBoundary::Robin;
    let mut jac = BandMatrix::zeros(2 * n, 2, 2);
    for i in 0..n {
        let (ru, rp) = (2 * i, 2 * i + 1);
        let mut kd = 0.0;
        if i > 0 {
            kd += faces[i - 1];
        }
        if i + 1 < n {
            kd += faces[i];
        }
        let e = p.omega() + phi[i];
        let a = u[i].abs();
        if i == n - 1 {
            jac.set_identity_row(ru, 1.0);
        } else {
            let mut local = m2 - e * e - p.mu() * (p.q() - 1.0) * a.powf(p.q() - 2.0);
            if critical {
                local -= (s - 1.0) * a.powf(s - 2.0);
            }
            jac.add(ru, ru, kd + w[i] * local);
            if i > 0 {
                jac.add(ru, ru - 2, -faces[i - 1]);
            }
            jac.add(ru, ru + 2, -faces[i]);
            jac.add(ru, rp, -2.0 * w[i] * e * u[i]);
        }
        if i == n - 1 && !robin {
            jac.set_identity_row(rp, 1.0);
        } else {
            let mut d = kd + w[i] * u[i] * u[i];
            if i == n - 1 {
                d += g.exterior_coefficient();
            }
            jac.add(rp, rp, d);
            if i > 0 {
                jac.add(rp, rp - 2, -faces[i - 1]);
            }
            if i + 1 < n {
                jac.add(rp, rp + 2, -faces[i]);
            }
            jac.add(rp, ru, 2.0 * w[i] * u[i] * e);
        }
    }
    jac
}

fn maxwell_residual(func: &ReducedFunctional, u: &[f64], phi: &[f64], g: &RadialGrid) -> Vec<f64> {
    let n = g.len();
    let w = g.lumped_weights();
    let mut r = grid::stiffness_apply(g, phi);
    for i in 0..n {
        r[i] += w[i] * u[i] * u[i] * (phi[i] + func.params().omega());
    }
    match func.options().phi_boundary {
        PhiBoundary::Dirichlet => r[n - 1] = 0.0,
        PhiBoundary::Robin => r[n - 1] += g.exterior_coefficient() * phi[n - 1],
    }
    r
}

struct Eval {
    u: RadialField,
    phi: Vec<f64>,
    raw: Vec<f64>,
    residual: f64,
}

fn evaluate(func: &ReducedFunctional, u: RadialField) -> Result<Eval, SolveError> {
    let grad = func.gradient(&u)?;
    let residual = grad.norm();
    Ok(Eval { phi: grad.phi.into_values(), raw: grad.raw, residual, u })
}

/// Damped Newton on the coupled `(u, phi)` system, re-solving `phi = Phi[u]`
/// after each step. Iterations count residual evaluations, so a start that
/// already meets `tol` reports one iteration.
pub fn newton_refine(
    func: &ReducedFunctional,
    u0: &RadialField,
    tol: f64,
    max_iterations: usize,
) -> Result<NewtonOutcome, SolveError> {
    let scale = u0.max_abs();
    if scale == 0.0 {
        return Err(SolveError::Trivial { max_abs: 0.0 });
    }
    let g = u0.grid().clone();
    let n = g.len();
    let mut start = u0.values().to_vec();
    start[n - 1] = 0.0;
    let mut cur = evaluate(func, RadialField::new(g.clone(), start)?)?;
    let mut history = Vec::new();
    let mut min_pivot = f64::INFINITY;
    for iteration in 1..=max_iterations.max(1) {
        history.push(cur.residual);
        if !cur.residual.is_finite() {
            return Err(SolveError::Diverged { iteration, residual: cur.residual });
        }
        if cur.residual < tol {
            let max_abs = cur.u.max_abs();
            if max_abs < 1e-6 * scale {
                return Err(SolveError::Trivial { max_abs });
            }
            return Ok(NewtonOutcome {
                phi: RadialField::new(g.clone(), cur.phi)?,
                profile: cur.u,
                residual: cur.residual,
                iterations: iteration,
                residual_history: history,
                min_pivot,
            });
        }
        if iteration == max_iterations {
            break;
        }
        let jac = assemble_jacobian(func, cur.u.values(), &cur.phi, &g);
        let rphi = maxwell_residual(func, cur.u.values(), &cur.phi, &g);
        let mut rhs = vec![0.0; 2 * n];
        for i in 0..n {
            rhs[2 * i] = -cur.raw[i];
            rhs[2 * i + 1] = -rphi[i];
        }
        let (delta, pivot) = jac.solve(&rhs).map_err(|e| match e {
            LinalgError::Singular { pivot, .. } => SolveError::Singular { iteration, min_pivot: pivot },
            other => SolveError::from(other),
        })?;
        min_pivot = min_pivot.min(pivot);
        let du: Vec<f64> = (0..n).map(|i| delta[2 * i]).collect();
        let du = RadialField::new(g.clone(), du)?;
        let mut lambda = 1.0;
        cur = loop {
            let trial = evaluate(func, cur.u.combine(1.0, &du, lambda)?)?;
            if trial.residual < (1.0 - 1e-4 * lambda) * cur.residual {
                break trial;
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                return Err(SolveError::Diverged { iteration, residual: cur.residual });
            }
        };
    }
    let residual = *history.last().unwrap_or(&f64::NAN);
    Err(SolveError::NoConvergence {
        stage: "newton".into(),
        residual,
        smallest_mu: func.params().mu(),
        trace: Box::new(SolverTrace { path_level_history: vec![], newton_history: history, continuation: vec![] }),
    })
}

/// Maximizer of `J(t u)` over `t > 0`, located by bracketing the sign change
/// of `<J'(t u), u>` and bisecting.
pub fn ray_maximize(func: &ReducedFunctional, u: &RadialField) -> Result<(f64, f64), SolveError> {
    let slope = |t: f64| -> Result<f64, SolveError> { Ok(func.gradient(&u.scaled(t))?.pairing(u)) };
    let (mut lo, mut hi) = (1.0, 1.0);
    if slope(1.0)? > 0.0 {
        while slope(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(SolveError::EndpointNotFound { t_max: hi });
            }
        }
    } else {
        while slope(lo)? <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(SolveError::Trivial { max_abs: lo * u.max_abs() });
            }
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, func.value(&u.scaled(t))?))
}

/// Steepest descent of `u -> max_t J(t u)`: each step moves along the
/// H1-preconditioned negative gradient and returns to the ray maximum.
/// Stops when the relative preconditioned gradient drops below `tol`.
/// Returns the final point and its level history.
pub fn ray_descent(
    func: &ReducedFunctional,
    start: &RadialField,
    tol: f64,
    max_steps: usize,
) -> Result<(RadialField, Vec<f64>), SolveError> {
    let g = start.grid().clone();
    let (t, mut level) = ray_maximize(func, start)?;
    let mut u = start.scaled(t);
    let mut levels = vec![level];
    let mut step = 1.0;
    for _ in 0..max_steps {
        let grad = func.gradient(&u)?;
        let p = precondition(&g, &grad.raw)?;
        let pn2: f64 = grad.raw.iter().zip(&p).map(|(a, b)| a * b).sum();
        if pn2.max(0.0).sqrt() < tol * h1_norm(&u) {
            break;
        }
        let p = RadialField::new(g.clone(), p)?;
        let mut s = step;
        loop {
            let trial = u.combine(1.0, &p, -s)?;
            if trial.max_abs() > 0.0 {
                let (t, j) = ray_maximize(func, &trial)?;
                if j <= level - 1e-4 * s * pn2 {
                    u = trial.scaled(t);
                    level = j;
                    step = (2.0 * s).min(1.0);
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-12 {
                return Ok((u, levels));
            }
        }
        levels.push(level);
    }
    Ok((u, levels))
}

struct StageOutcome {
    newton: NewtonOutcome,
    path_levels: Vec<f64>,
    path_steps: usize,
    endpoint_energy: f64,
}

/// Path deformation until the highest knot is nearly critical (or the
/// deformation stalls), ray-maximum descent from that knot, then Newton.
/// If Newton fails, the descent tolerance is tightened and Newton retried.
fn path_then_newton(func: &ReducedFunctional, g: &Arc<RadialGrid>, options: &SolveOptions) -> Result<StageOutcome, SolveError> {
    let seed = gaussian_seed(g, options.seed_width);
    let (u1, _) = find_endpoint(func, &seed)?;
    let mut state = PathState::straight(func, &u1, options.knots)?;
    let endpoint_energy = *state.energies.last().unwrap();
    let mut levels = vec![state.level_estimate];
    let mut steps = 0;
    while !state.converged && !state.stagnated && steps < options.max_path_steps {
        state = mountain_pass_step(&state, func, options.path_tol)?;
        steps += 1;
        levels.push(state.level_estimate);
    }
    let mut candidate = state.knots[state.max_index].clone();
    let mut tol = options.path_tol;
    let mut last_error: SolveError;
    loop {
        let (polished, _) = ray_descent(func, &candidate, tol, options.max_path_steps)?;
        candidate = polished;
        match newton_refine(func, &candidate, options.tol, options.max_newton_iterations) {
            Ok(newton) => {
                return Ok(StageOutcome { newton, path_levels: levels, path_steps: steps, endpoint_energy });
            }
            Err(e) => last_error = e,
        }
        if tol < 1e-7 {
            break;
        }
        tol *= 0.1;
    }
    let residual = match &last_error {
        SolveError::NoConvergence { residual, .. } | SolveError::Diverged { residual, .. } => *residual,
        _ => f64::NAN,
    };
    Err(SolveError::NoConvergence {
        stage: format!("mountain pass ({steps} path steps; last Newton error: {last_error})"),
        residual,
        smallest_mu: func.params().mu(),
        trace: Box::new(SolverTrace { path_level_history: levels, newton_history: vec![], continuation: vec![] }),
    })
}

/// Sample `J` on the H1 sphere of radius `rho` in the given directions.
pub fn sphere_minimum(func: &ReducedFunctional, directions: &[RadialField], rho: f64) -> Result<f64, SolveError> {
    let vals: Result<Vec<f64>, SolveError> = directions
        .par_iter()
        .map(|d| {
            let nd = h1_norm(d);
            func.value(&d.scaled(rho / nd)).map_err(SolveError::from)
        })
        .collect();
    Ok(vals?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Full pipeline: gate, (continuation,) path, Newton, diagnostics.
pub fn solve(params: &KgmParams, options: &SolveOptions) -> Result<SaddleResult, SolveError> {
    let verdict = classify(params)?;
    if !verdict.hypothesis_met && !options.override_admissibility {
        return Err(SolveError::Refused { explanation: verdict.explanation.clone() });
    }
    let g = RadialGrid::new(params.dimension(), options.r_max, options.nodes)?;
    let fopts = FunctionalOptions { phi_boundary: options.phi_boundary, include_critical: true };
    let target = ReducedFunctional::with_options(*params, fopts);

    let mut continuation = Vec::new();
    let (newton, path_levels, path_steps, endpoint_energy) = if verdict.mu_requirement == MuRequirement::SufficientlyLarge {
        let steps = options.min_mu_steps.max(1);
        let mu0 = params.mu() / options.mu_factor.powi(steps as i32);
        let start = ReducedFunctional::with_options(params.with_mu(mu0)?, fopts);
        let stage = path_then_newton(&start, &g, options)?;
        continuation.push(ContinuationStep {
            mu: mu0,
            energy: start.value(&stage.newton.profile)?,
            residual: stage.newton.residual,
            iterations: stage.newton.iterations,
        });
        let mut current = stage.newton;
        for k in 1..=steps {
            let mu = if k == steps { params.mu() } else { mu0 * options.mu_factor.powi(k as i32) };
            let f = ReducedFunctional::with_options(params.with_mu(mu)?, fopts);
            match newton_refine(&f, &current.profile, options.tol, options.max_newton_iterations) {
                Ok(next) => {
                    continuation.push(ContinuationStep {
                        mu,
                        energy: f.value(&next.profile)?,
                        residual: next.residual,
                        iterations: next.iterations,
                    });
                    current = next;
                }
                Err(e) => {
                    let smallest_mu = continuation.last().map(|c| c.mu).unwrap_or(mu0);
                    let residual = match &e {
                        SolveError::NoConvergence { residual, .. } | SolveError::Diverged { residual, .. } => *residual,
                        _ => f64::NAN,
                    };
                    return Err(SolveError::NoConvergence {
                        stage: format!("mu continuation at mu = {mu:e}: {e}"),
                        residual,
                        smallest_mu,
                        trace: Box::new(SolverTrace {
                            path_level_history: stage.path_levels,
                            newton_history: current.residual_history,
                            continuation,
                        }),
                    });
                }
            }
        }
        (current, stage.path_levels, stage.path_steps, stage.endpoint_energy)
    } else {
        let stage = path_then_newton(&target, &g, options)?;
        (stage.newton, stage.path_levels, stage.path_steps, stage.endpoint_energy)
    };

    let profile = newton.profile;
    let breakdown = target.energy(&profile)?;
    let energy = breakdown.total;
    let sol = target.solve_phi(&profile)?;
    let sobolev_constant = instanton::sobolev_constant(params.dimension());
    let threshold = instanton::threshold(sobolev_constant, params.dimension());

    let rho = 0.1 * h1_norm(&profile);
    let mut directions = vec![profile.clone()];
    for w in [0.5, 1.0, 2.0, 4.0] {
        directions.push(gaussian_seed(&g, w));
    }
    let geometry = GeometryCheck {
        rho,
        alpha: sphere_minimum(&target, &directions, rho)?,
        directions: directions.len(),
        endpoint_energy,
    };

    let truncation = if options.check_truncation {
        let nodes = ((options.nodes - 1) as f64 * 1.5).round() as usize + 1;
        let r_max = g.spacing() * (nodes - 1) as f64;
        let big = RadialGrid::new(params.dimension(), r_max, nodes)?;
        let start = profile.interpolate_to(&big);
        let out = newton_refine(&target, &start, options.tol, options.max_newton_iterations)?;
        let e = target.value(&out.profile)?;
        Some(TruncationCheck {
            r_max,
            nodes,
            energy: e,
            relative_change: (e - energy).abs() / energy.abs(),
            residual: out.residual,
        })
    } else {
        None
    };

    let refinement = if options.check_refinement {
        let nodes = 2 * options.nodes - 1;
        let fine = RadialGrid::new(params.dimension(), options.r_max, nodes)?;
        let start = profile.interpolate_to(&fine);
        let interpolated_residual = target.gradient(&start)?.norm();
        let out = newton_refine(&target, &start, options.tol, options.max_newton_iterations)?;
        Some(RefinementCheck {
            nodes,
            interpolated_residual,
            residual: out.residual,
            energy: target.value(&out.profile)?,
        })
    } else {
        None
    };

    Ok(SaddleResult {
        phi: sol.phi.clone(),
        energy,
        breakdown,
        residual: newton.residual,
        iterations: newton.iterations,
        path_steps,
        path_level_history: path_levels,
        newton_history: newton.residual_history,
        sobolev_constant,
        threshold,
        below_threshold: energy > 0.0 && energy < threshold,
        admissibility_overridden: !verdict.hypothesis_met,
        verdict,
        smallest_mu: continuation.last().map(|c| c.mu).unwrap_or(params.mu()),
        continuation,
        phi_diagnostics: sol.diagnostics(),
        geometry,
        truncation,
        refinement,
        profile,
    })
}

/// Weighted residual of `J'` at `u` (convenience for diagnostics).
pub fn residual_norm(func: &ReducedFunctional, u: &RadialField) -> Result<f64, SolveError> {
    let grad = func.gradient(u)?;
    Ok(weighted_norm(u.grid(), &grad.raw))
}
