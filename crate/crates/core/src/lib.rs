//! Radial Klein-Gordon-Maxwell solver with critical Sobolev exponent.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: physical parameters and the existence-hypothesis gate
//! - [`grid`]: uniform radial mesh, discrete operators, quadrature, norms
//! - [`linalg`]: tridiagonal and banded direct solvers
//! - [`quadrature`]: adaptive Gauss-Kronrod quadrature on closed-form integrands
//! - [`phi`]: the Maxwell potential `Phi[u]`
//! - [`functional`]: the reduced energy `J` and its derivative
//! - [`saddle`]: mountain-pass path search, Newton refinement, continuation
//! - [`instanton`]: Talenti instantons, Sobolev constant, threshold estimates
//! - [`verify`]: seeded invariant suite used by the CLI

pub mod functional;
pub mod grid;
pub mod instanton;
pub mod linalg;
pub mod params;
pub mod phi;
pub mod quadrature;
pub mod saddle;
pub mod verify;

pub use functional::{EnergyBreakdown, FunctionalOptions, ReducedFunctional};
pub use grid::{RadialField, RadialGrid};
pub use params::{classify, AdmissibilityVerdict, KgmParams};
pub use phi::{solve_phi, PhiBoundary, PhiSolution};
pub use saddle::{solve, SaddleResult, SolveOptions};

use thiserror::Error;

/// Umbrella error for callers that drive several modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] params::ParamError),
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Phi(#[from] phi::PhiError),
    #[error(transparent)]
    Solve(#[from] saddle::SolveError),
    #[error(transparent)]
    Instanton(#[from] instanton::InstantonError),
}
