//! Uniform radial mesh on `[0, r_max]` and nodal fields on it.
//!
//! Two families of discrete operators live here:
//!
//! - the pointwise ones ([`laplacian`], [`gradient`], [`integrate`], norms),
//!   which approximate the continuous operators to second order;
//! - the variational ones ([`RadialGrid::face_coefficients`],
//!   [`RadialGrid::lumped_weights`], [`stiffness_apply`]), which define the
//!   discrete energy used by the Maxwell solve and the reduced functional.
//!   The Euler-Lagrange equations of that energy are symmetric by
//!   construction, so the discrete derivative is exact.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("r_max must be positive and finite, got {0}")]
    Radius(f64),
    #[error("node count must be at least 16, got {0}")]
    NodeCount(usize),
    #[error("field has {got} values, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Gamma function for the half-integer and integer arguments `N/2`.
fn gamma_half(n: usize) -> f64 {
    // Gamma(k) = (k-1)!, Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Area of the unit sphere in R^N, `2 pi^{N/2} / Gamma(N/2)`.
pub fn sphere_area(dimension: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dimension as f64 / 2.0) / gamma_half(dimension)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dimension: usize,
    r_max: f64,
    spacing: f64,
    surface: f64,
    nodes: Vec<f64>,
    faces: Vec<f64>,
    lumped: Vec<f64>,
    quadrature: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dimension: usize, r_max: f64, node_count: usize) -> Result<Arc<Self>, GridError> {
        if dimension < 3 {
            return Err(GridError::Dimension(dimension));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(GridError::Radius(r_max));
        }
        if node_count < 16 {
            return Err(GridError::NodeCount(node_count));
        }
        let n = node_count;
        let h = r_max / (n - 1) as f64;
        let surface = sphere_area(dimension);
        let d = dimension as i32;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let nodes = {
            let mut v = nodes;
            v[n - 1] = r_max;
            v
        };

        let faces: Vec<f64> = (0..n - 1)
            .map(|i| surface * ((i as f64 + 0.5) * h).powi(d - 1) / h)
            .collect();

        let mut lumped: Vec<f64> = nodes.iter().map(|r| surface * h * r.powi(d - 1)).collect();
        lumped[n - 1] *= 0.5;
        let origin = surface * (0.5 * h).powi(d) / dimension as f64;
        lumped[0] = origin;
        lumped[1] -= origin;

        let mut simpson = vec![0.0; n];
        let intervals = n - 1;
        let even = intervals - intervals % 2;
        for k in (0..even).step_by(2) {
            simpson[k] += h / 3.0;
            simpson[k + 1] += 4.0 * h / 3.0;
            simpson[k + 2] += h / 3.0;
        }
        if even < intervals {
            simpson[n - 2] += 0.5 * h;
            simpson[n - 1] += 0.5 * h;
        }
        let quadrature = simpson
            .iter()
            .zip(&nodes)
            .map(|(w, r)| w * surface * r.powi(d - 1))
            .collect();

        Ok(Arc::new(Self {
            dimension,
            r_max,
            spacing: h,
            surface,
            nodes,
            faces,
            lumped,
            quadrature,
        }))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `omega_{N-1}`, the area of the unit sphere.
    pub fn surface_measure(&self) -> f64 {
        self.surface
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `omega_{N-1} r_{i+1/2}^{N-1} / h` for each of the `n-1` cells.
    pub fn face_coefficients(&self) -> &[f64] {
        &self.faces
    }

    /// Lumped mass weights `W_i` of the variational discretisation.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    /// Composite Simpson weights including `omega_{N-1} r^{N-1}`.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quadrature
    }

    /// Coefficient of the exterior harmonic energy: a harmonic function
    /// equal to `c` on the sphere of radius `r_max` and decaying like
    /// `r^{2-N}` has Dirichlet energy `omega_{N-1} (N-2) r_max^{N-2} c^2`.
    pub fn exterior_coefficient(&self) -> f64 {
        self.surface * (self.dimension as f64 - 2.0) * self.r_max.powi(self.dimension as i32 - 2)
    }
}

/// Nodal values of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Sample `f` at the nodes. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values).expect("sampled function must be finite")
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.map(|v| t * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self, GridError> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Write `r,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{r:e},{v:e}")?;
        }
        Ok(())
    }

    /// Linear interpolation onto another grid; zero beyond this grid's `r_max`.
    pub fn interpolate_to(&self, target: &Arc<RadialGrid>) -> Self {
        let h = self.grid.spacing();
        let n = self.values.len();
        let values = target
            .nodes()
            .iter()
            .map(|&r| {
                if r >= self.grid.r_max() {
                    return if r == self.grid.r_max() { self.values[n - 1] } else { 0.0 };
                }
                let x = r / h;
                let i = (x.floor() as usize).min(n - 2);
                let s = x - i as f64;
                (1.0 - s) * self.values[i] + s * self.values[i + 1]
            })
            .collect();
        Self { grid: target.clone(), values }
    }
}

/// Finite-volume radial Laplacian `u'' + (N-1) u'/r`.
///
/// Cell `i` is the shell `[r_i - h/2, r_i + h/2]` (a ball of radius `h/2`
/// at the origin). At the origin this reduces to `2N (u_1 - u_0)/h^2`, the
/// ghost-node form of `N u''(0)`; beyond `r_max` a ghost value 0 is used.
pub fn laplacian(u: &RadialField) -> RadialField {
    let g = u.grid();
    let n = g.len();
    let h = g.spacing();
    let d = g.dimension() as i32;
    let om = g.surface_measure();
    let v = u.values();
    let face = |rf: f64| om * rf.powi(d - 1) / h;
    let volume = |a: f64, b: f64| om * (b.powi(d) - a.powi(d)) / d as f64;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let r = g.nodes()[i];
        let lo = (r - 0.5 * h).max(0.0);
        let hi = r + 0.5 * h;
        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
        let mut flux = face(hi) * (right - v[i]);
        if i > 0 {
            flux -= face(lo) * (v[i] - v[i - 1]);
        }
        out[i] = flux / volume(lo, hi);
    }
    RadialField { grid: g.clone(), values: out }
}

/// `omega_{N-1} * int_0^{r_max} f(r) r^{N-1} dr` by composite Simpson.
pub fn integrate(f: &RadialField) -> f64 {
    f.grid().quadrature_weights().iter().zip(f.values()).map(|(w, v)| w * v).sum()
}

/// Radial derivative: central differences inside, second-order one-sided
/// stencils at both ends.
pub fn gradient(u: &RadialField) -> RadialField {
    let v = u.values();
    let n = v.len();
    let h = u.grid().spacing();
    let mut g = vec![0.0; n];
    g[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    g[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        g[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    RadialField { grid: u.grid().clone(), values: g }
}

pub fn norm_lp(u: &RadialField, p: f64) -> f64 {
    integrate(&u.map(|x| x.abs().powf(p))).max(0.0).powf(1.0 / p)
}

pub fn norm_d12(u: &RadialField) -> f64 {
    integrate(&gradient(u).map(|x| x * x)).max(0.0).sqrt()
}

pub fn norm_h1(u: &RadialField) -> f64 {
    let a = norm_d12(u);
    let b = norm_lp(u, 2.0);
    (a * a + b * b).sqrt()
}

/// `(K u)_i`, the stiffness matrix of the discrete Dirichlet energy
/// `sum_i faces_i (u_{i+1} - u_i)^2` (halved), applied to `u`.
pub fn stiffness_apply(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let faces = grid.face_coefficients();
    let mut out = vec![0.0; u.len()];
    for (i, a) in faces.iter().enumerate() {
        let flux = a * (u[i + 1] - u[i]);
        out[i] -= flux;
        out[i + 1] += flux;
    }
    out
}

/// `sum_i faces_i (u_{i+1} - u_i)^2`.
pub fn dirichlet_form(grid: &RadialGrid, u: &[f64]) -> f64 {
    grid.face_coefficients()
        .iter()
        .zip(u.windows(2))
        .map(|(a, w)| a * (w[1] - w[0]).powi(2))
        .sum()
}

/// `sum_i W_i f_i`.
pub fn lumped_sum(grid: &RadialGrid, f: impl Fn(usize) -> f64) -> f64 {
    grid.lumped_weights().iter().enumerate().map(|(i, w)| w * f(i)).sum()
}
