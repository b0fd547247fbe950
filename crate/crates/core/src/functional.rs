//! The reduced energy
//!
//! ```text
//! J(u) = 1/2 int |grad u|^2 + (m0^2 - omega^2) u^2 + |grad Phi|^2 + Phi^2 u^2
//!        - mu/q int |u|^q - 1/2* int |u|^{2*}
//! ```
//!
//! and its derivative
//!
//! ```text
//! J'(u) = -Laplace u + [m0^2 - (omega + Phi)^2] u - mu |u|^{q-2} u - |u|^{2*-2} u.
//! ```
//!
//! Both are evaluated in the variational discretisation of [`crate::grid`],
//! in which `Phi[u]` is the exact stationary point of the discrete two-field
//! energy in `phi`. The discrete gradient is therefore the exact derivative
//! of the discrete energy; no derivative of `Phi` with respect to `u` is
//! needed. Values at `r_max` are pinned to zero (Dirichlet truncation), so
//! the gradient's last entry is always zero.

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{self, RadialField};
use crate::params::KgmParams;
use crate::phi::{self, PhiBoundary, PhiError, PhiSolution};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub mass_term: f64,
    pub maxwell: f64,
    pub power_term: f64,
    pub critical_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalOptions {
    pub phi_boundary: PhiBoundary,
    /// Debug switch: drop the critical term from energy and gradient.
    pub include_critical: bool,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        Self { phi_boundary: PhiBoundary::Dirichlet, include_critical: true }
    }
}

/// Discrete gradient of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Nodal derivative `dJ_h/du_i`; pairs with a perturbation as `sum raw_i v_i`.
    pub raw: Vec<f64>,
    /// L2(weighted) representation `raw_i / W_i`.
    pub field: RadialField,
    pub phi: RadialField,
}

impl Gradient {
    /// `<J'(u), v>`.
    pub fn pairing(&self, v: &RadialField) -> f64 {
        self.raw.iter().zip(v.values()).map(|(a, b)| a * b).sum()
    }

    /// Weighted L2 norm of the gradient field, `sqrt(sum raw_i^2 / W_i)`.
    pub fn norm(&self) -> f64 {
        weighted_norm(self.field.grid(), &self.raw)
    }
}

pub(crate) fn weighted_norm(g: &grid::RadialGrid, raw: &[f64]) -> f64 {
    raw.iter()
        .zip(g.lumped_weights())
        .map(|(r, w)| r * r / w)
        .sum::<f64>()
        .sqrt()
}

/// Result of a directional finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdCheck {
    pub step: f64,
    pub analytic: f64,
    pub central: f64,
    pub forward: f64,
    pub relative_error: f64,
}

/// `|u|^{p-2} u` with the continuous extension 0 at `u = 0`.
fn signed_power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(p - 2.0) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFunctional {
    params: KgmParams,
    options: FunctionalOptions,
}

impl ReducedFunctional {
    pub fn new(params: KgmParams) -> Self {
        Self { params, options: FunctionalOptions::default() }
    }

    pub fn with_options(params: KgmParams, options: FunctionalOptions) -> Self {
        Self { params, options }
    }

    pub fn params(&self) -> &KgmParams {
        &self.params
    }

    pub fn options(&self) -> &FunctionalOptions {
        &self.options
    }

    pub fn solve_phi(&self, u: &RadialField) -> Result<PhiSolution, PhiError> {
        phi::solve_phi_with(u, &self.params, self.options.phi_boundary)
    }

    fn phi_values(&self, u: &RadialField) -> Result<Vec<f64>, PhiError> {
        if u.grid().dimension() != self.params.dimension() {
            return Err(PhiError::DimensionMismatch {
                grid: u.grid().dimension(),
                params: self.params.dimension(),
            });
        }
        phi::solve_values(u, self.params.omega(), self.options.phi_boundary)
    }

    /// Energy breakdown given a precomputed potential.
    pub fn breakdown_with_phi(&self, u: &RadialField, phi: &[f64]) -> EnergyBreakdown {
        let g = u.grid();
        let p = &self.params;
        let v = u.values();
        let kinetic = 0.5 * grid::dirichlet_form(g, v);
        let mass_term = 0.5 * (p.mass().powi(2) - p.omega().powi(2)) * grid::lumped_sum(g, |i| v[i] * v[i]);
        let mut field = grid::dirichlet_form(g, phi);
        if self.options.phi_boundary == PhiBoundary::Robin {
            let last = phi[phi.len() - 1];
            field += g.exterior_coefficient() * last * last;
        }
        let maxwell = 0.5 * field + 0.5 * grid::lumped_sum(g, |i| phi[i] * phi[i] * v[i] * v[i]);
        let power_term = p.mu() / p.q() * grid::lumped_sum(g, |i| v[i].abs().powf(p.q()));
        let critical_term = if self.options.include_critical {
            let s = p.two_star();
            grid::lumped_sum(g, |i| v[i].abs().powf(s)) / s
        } else {
            0.0
        };
        EnergyBreakdown {
            kinetic,
            mass_term,
            maxwell,
            power_term,
            critical_term,
            total: kinetic + mass_term + maxwell - power_term - critical_term,
        }
    }

    pub fn energy(&self, u: &RadialField) -> Result<EnergyBreakdown, PhiError> {
        let phi = self.phi_values(u)?;
        Ok(self.breakdown_with_phi(u, &phi))
    }

    pub fn value(&self, u: &RadialField) -> Result<f64, PhiError> {
        Ok(self.energy(u)?.total)
    }

    /// Raw nodal gradient given a precomputed potential.
    pub fn raw_gradient_with_phi(&self, u: &RadialField, phi: &[f64]) -> Vec<f64> {
        let g = u.grid();
        let p = &self.params;
        let v = u.values();
        let w = g.lumped_weights();
        let m2 = p.mass().powi(2);
        let s = p.two_star();
        let mut raw = grid::stiffness_apply(g, v);
        for i in 0..v.len() {
            let e = p.omega() + phi[i];
            let mut local = (m2 - e * e) * v[i] - p.mu() * signed_power(v[i], p.q());
            if self.options.include_critical {
                local -= signed_power(v[i], s);
            }
            raw[i] += w[i] * local;
        }
        let n = raw.len();
        raw[n - 1] = 0.0;
        raw
    }

    pub fn gradient(&self, u: &RadialField) -> Result<Gradient, PhiError> {
        let phi = self.phi_values(u)?;
        let raw = self.raw_gradient_with_phi(u, &phi);
        let field = raw.iter().zip(u.grid().lumped_weights()).map(|(r, w)| r / w).collect();
        Ok(Gradient {
            raw,
            field: RadialField::new(u.grid().clone(), field)?,
            phi: RadialField::new(u.grid().clone(), phi)?,
        })
    }

    /// `J(t u)` for each `t`; each evaluation solves for `Phi[t u]`.
    pub fn along_ray(&self, u: &RadialField, ts: &[f64]) -> Result<Vec<f64>, PhiError> {
        ts.par_iter().map(|&t| self.value(&u.scaled(t))).collect()
    }

    /// The two-field energy
    /// `F(u, phi) = 1/2 int |grad u|^2 - |grad phi|^2 + [m0^2 - (omega+phi)^2] u^2 - ...`,
    /// stationary in `phi` at `Phi[u]` where it equals `J(u)`.
    pub fn two_field_energy(&self, u: &RadialField, phi: &RadialField) -> f64 {
        let g = u.grid();
        let p = &self.params;
        let (v, f) = (u.values(), phi.values());
        let mut field = grid::dirichlet_form(g, f);
        if self.options.phi_boundary == PhiBoundary::Robin {
            let last = f[f.len() - 1];
            field += g.exterior_coefficient() * last * last;
        }
        let potential = grid::lumped_sum(g, |i| (p.mass().powi(2) - (p.omega() + f[i]).powi(2)) * v[i] * v[i]);
        let power = p.mu() / p.q() * grid::lumped_sum(g, |i| v[i].abs().powf(p.q()));
        let critical = if self.options.include_critical {
            let s = p.two_star();
            grid::lumped_sum(g, |i| v[i].abs().powf(s)) / s
        } else {
            0.0
        };
        0.5 * (grid::dirichlet_form(g, v) - field + potential) - power - critical
    }

    /// Compare `<J'(u), v>` with central and forward differences of `J`
    /// along `v` at step `t` (`None`: `sqrt(eps)` times the amplitude ratio).
    pub fn check_direction(&self, u: &RadialField, v: &RadialField, t: Option<f64>) -> Result<FdCheck, PhiError> {
        let scale = u.max_abs().max(1.0) / v.max_abs().max(f64::MIN_POSITIVE);
        let step = t.unwrap_or(f64::EPSILON.sqrt() * scale);
        let analytic = self.gradient(u)?.pairing(v);
        let j0 = self.value(u)?;
        let jp = self.value(&u.combine(1.0, v, step)?)?;
        let jm = self.value(&u.combine(1.0, v, -step)?)?;
        let central = (jp - jm) / (2.0 * step);
        let forward = (jp - j0) / step;
        let relative_error = (central - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
        Ok(FdCheck { step, analytic, central, forward, relative_error })
    }
}

/// `J(u)` with default options (Dirichlet potential, critical term on).
pub fn eval_j(u: &RadialField, params: &KgmParams) -> Result<EnergyBreakdown, PhiError> {
    ReducedFunctional::new(*params).energy(u)
}

/// L2(weighted) representation of `J'(u)` with default options.
pub fn grad_j(u: &RadialField, params: &KgmParams) -> Result<RadialField, PhiError> {
    Ok(ReducedFunctional::new(*params).gradient(u)?.field)
}

/// `J(t u)` for each `t` with default options.
pub fn eval_j_along_ray(u: &RadialField, ts: &[f64], params: &KgmParams) -> Result<Vec<f64>, PhiError> {
    ReducedFunctional::new(*params).along_ray(u, ts)
}
