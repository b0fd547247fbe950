//! Problem parameters and the existence-hypothesis gate.
//!
//! The gate mirrors the two coercivity regimes of the reduced functional
//! (`4 <= q < 2*` with `|m0| > |omega|`, and `2 < q < 4` with
//! `|m0| sqrt(q-2) > |omega| sqrt(2)`) together with the dimension-dependent
//! requirement on the size of `mu`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("q = {q} lies outside the open interval (2, 2*) = (2, {two_star}) for N = {dimension}")]
    Exponent { q: f64, two_star: f64, dimension: usize },
    #[error("mass must be positive and finite, got {0}")]
    Mass(f64),
    #[error("omega must be finite and non-zero, got {0}")]
    Omega(f64),
    #[error("mu must be positive and finite, got {0}")]
    Mu(f64),
}

/// Physical parameters `(N, m0, omega, mu, q)`.
///
/// The critical exponent `2* = 2N/(N-2)` is always derived from `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KgmParams {
    dimension: usize,
    mass: f64,
    omega: f64,
    mu: f64,
    q: f64,
}

impl KgmParams {
    /// Validated constructor: `N >= 3`, `2 < q < 2*`, `m0 > 0`, `mu > 0`, `omega != 0`.
    pub fn new(dimension: usize, mass: f64, omega: f64, mu: f64, q: f64) -> Result<Self, ParamError> {
        let p = Self::control(dimension, mass, omega, mu, q)?;
        if omega == 0.0 {
            return Err(ParamError::Omega(omega));
        }
        if mu <= 0.0 {
            return Err(ParamError::Mu(mu));
        }
        Ok(p)
    }

    /// Relaxed constructor for control experiments: allows `omega = 0` and
    /// `mu = 0`. Everything else is validated as in [`KgmParams::new`].
    pub fn control(dimension: usize, mass: f64, omega: f64, mu: f64, q: f64) -> Result<Self, ParamError> {
        if dimension < 3 {
            return Err(ParamError::Dimension(dimension));
        }
        let two_star = critical_exponent(dimension);
        if !(q.is_finite() && q > 2.0 && q < two_star) {
            return Err(ParamError::Exponent { q, two_star, dimension });
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(ParamError::Mass(mass));
        }
        if !omega.is_finite() {
            return Err(ParamError::Omega(omega));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(ParamError::Mu(mu));
        }
        Ok(Self { dimension, mass, omega, mu, q })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn two_star(&self) -> f64 {
        critical_exponent(self.dimension)
    }

    /// Same parameters with a different `mu` (used by continuation).
    pub fn with_mu(&self, mu: f64) -> Result<Self, ParamError> {
        Self::control(self.dimension, self.mass, self.omega, mu, self.q)
    }
}

/// `2* = 2N/(N-2)`.
pub fn critical_exponent(dimension: usize) -> f64 {
    let n = dimension as f64;
    2.0 * n / (n - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoerciveRegime {
    /// `4 <= q < 2*`
    HighQ,
    /// `2 < q < 4`
    LowQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DimensionCase {
    N3,
    N4,
    N5,
    N6plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MuRequirement {
    AnyPositive,
    SufficientlyLarge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityVerdict {
    pub coercive_regime: CoerciveRegime,
    pub hypothesis_met: bool,
    pub dimension_case: DimensionCase,
    pub mu_requirement: MuRequirement,
    pub explanation: String,
}

/// Classify parameters against the existence hypotheses.
pub fn classify(params: &KgmParams) -> Result<AdmissibilityVerdict, ParamError> {
    // Re-validate: the struct can only be built through the constructors,
    // but classify is also the documented entry point for domain errors.
    let params = KgmParams::control(
        params.dimension,
        params.mass,
        params.omega,
        params.mu,
        params.q,
    )?;
    let q = params.q;
    let m0 = params.mass.abs();
    let w = params.omega.abs();

    let (coercive_regime, hypothesis_met, inequality) = if q >= 4.0 {
        (CoerciveRegime::HighQ, m0 > w, format!("|m0| = {m0} > |omega| = {w}"))
    } else {
        let lhs = m0 * (q - 2.0).sqrt();
        let rhs = w * 2f64.sqrt();
        (
            CoerciveRegime::LowQ,
            lhs > rhs,
            format!("|m0| sqrt(q-2) = {lhs} > |omega| sqrt(2) = {rhs}"),
        )
    };

    let dimension_case = match params.dimension {
        3 => DimensionCase::N3,
        4 => DimensionCase::N4,
        5 => DimensionCase::N5,
        _ => DimensionCase::N6plus,
    };
    let mu_requirement = match dimension_case {
        DimensionCase::N5 if q >= 8.0 / 3.0 => MuRequirement::SufficientlyLarge,
        DimensionCase::N3 if q <= 4.0 => MuRequirement::SufficientlyLarge,
        _ => MuRequirement::AnyPositive,
    };

    let mut explanation = format!(
        "{:?} regime (q = {q}, 2* = {}): {} {}; case {:?}, mu requirement {:?}",
        coercive_regime,
        params.two_star(),
        inequality,
        if hypothesis_met { "holds" } else { "fails (strict inequality required)" },
        dimension_case,
        mu_requirement,
    );
    if params.omega < 0.0 {
        explanation.push_str("; omega < 0: the potential takes values in [0, -omega]");
    }

    Ok(AdmissibilityVerdict {
        coercive_regime,
        hypothesis_met,
        dimension_case,
        mu_requirement,
        explanation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_dimensional_high_q() {
        let v = classify(&KgmParams::new(3, 1.0, 0.5, 1.0, 5.0).unwrap()).unwrap();
        assert_eq!(v.coercive_regime, CoerciveRegime::HighQ);
        assert!(v.hypothesis_met);
        assert_eq!(v.dimension_case, DimensionCase::N3);
        assert_eq!(v.mu_requirement, MuRequirement::AnyPositive);
    }

    #[test]
    fn low_q_boundary_is_rejected() {
        let v = classify(&KgmParams::new(4, 1.0, 1.0, 1.0, 3.0).unwrap()).unwrap();
        assert_eq!(v.coercive_regime, CoerciveRegime::LowQ);
        assert!(!v.hypothesis_met);
    }

    #[test]
    fn five_dimensional_needs_large_mu() {
        let v = classify(&KgmParams::new(5, 2.0, 0.1, 1.0, 3.0).unwrap()).unwrap();
        assert_eq!(v.coercive_regime, CoerciveRegime::LowQ);
        assert!(v.hypothesis_met);
        assert_eq!(v.dimension_case, DimensionCase::N5);
        assert_eq!(v.mu_requirement, MuRequirement::SufficientlyLarge);
    }

    #[test]
    fn q_four_is_high_regime() {
        let v = classify(&KgmParams::new(3, 1.0, 0.5, 1.0, 4.0).unwrap()).unwrap();
        assert_eq!(v.coercive_regime, CoerciveRegime::HighQ);
        assert_eq!(v.mu_requirement, MuRequirement::SufficientlyLarge);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            KgmParams::new(3, 1.0, 0.5, 1.0, 6.0),
            Err(ParamError::Exponent { .. })
        ));
        assert!(matches!(KgmParams::new(3, 1.0, 0.5, 1.0, 2.0), Err(ParamError::Exponent { .. })));
        assert!(matches!(KgmParams::new(2, 1.0, 0.5, 1.0, 3.0), Err(ParamError::Dimension(2))));
        assert!(matches!(KgmParams::new(3, 1.0, 0.0, 1.0, 3.0), Err(ParamError::Omega(_))));
        assert!(matches!(KgmParams::new(3, 1.0, 0.5, 0.0, 3.0), Err(ParamError::Mu(_))));
        assert!(KgmParams::control(3, 1.0, 0.0, 0.0, 3.0).is_ok());
    }

    #[test]
    fn negative_omega_is_noted() {
        let v = classify(&KgmParams::new(4, 2.0, -1.0, 1.0, 3.0).unwrap()).unwrap();
        assert!(v.hypothesis_met);
        assert!(v.explanation.contains("omega < 0"));
    }
}
