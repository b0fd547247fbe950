//! Run configuration: flat `key=value` files, flag overrides, validation
//! with provenance, and the canonical hash of the effective settings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use kgm_core::instanton::MuMode;
use kgm_core::params::{KgmParams, ParamError};
use kgm_core::phi::PhiBoundary;
use kgm_core::saddle::SolveOptions;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Instanton,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Instanton => "instanton",
            Mode::Verify => "verify",
        }
    }
}

/// Where a setting came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Default,
    File { path: String, line: usize },
    Flag(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Default => write!(f, "default"),
            Source::File { path, line } => write!(f, "{path}:{line}"),
            Source::Flag(name) => write!(f, "--{name}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(origin: impl fmt::Display, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { origin: origin.to_string(), message: message.into() }
}

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "mode",
    "dimension",
    "mass",
    "omega",
    "mu",
    "q",
    "rmax",
    "nodes",
    "tol",
    "knots",
    "mu_factor",
    "min_mu_steps",
    "path_tol",
    "max_path_steps",
    "max_newton_iterations",
    "seed_width",
    "phi_boundary",
    "override_admissibility",
    "check_truncation",
    "check_refinement",
    "radius",
    "eps_decades",
    "per_decade",
    "seed",
    "out",
];

/// Settings as strings, each with its origin. Later layers override earlier.
#[derive(Debug, Clone, Default)]
pub struct Layered {
    entries: BTreeMap<String, (String, Source)>,
}

impl Layered {
    /// Parse a config file: one `key = value` per line, `#` starts a comment,
    /// blank lines ignored. Unknown and repeated keys are errors.
    pub fn parse_file(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let origin = Source::File { path: path.to_string(), line };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| invalid(&origin, format!("expected key=value, got '{content}'")))?;
            let key = key.trim().to_ascii_lowercase();
            let key = if key == "r" { "radius".to_string() } else { key };
            let value = value.trim();
            if !KEYS.contains(&key.as_str()) {
                return Err(invalid(&origin, format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(invalid(&origin, format!("empty value for '{key}'")));
            }
            if let Some((_, first)) = out.entries.get(&key) {
                return Err(invalid(&origin, format!("'{key}' already set at {first}")));
            }
            out.entries.insert(key, (value.to_string(), origin));
        }
        Ok(out)
    }

    pub fn read_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse_file(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display, flag: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), Source::Flag(flag.to_string())));
    }

    pub fn get(&self, key: &str) -> Option<&(String, Source)> {
        self.entries.get(key)
    }

    fn origin(&self, key: &str) -> Source {
        self.entries.get(key).map(|e| e.1.clone()).unwrap_or(Source::Default)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some((v, origin)) => v.parse().map_err(|e| invalid(origin, format!("{key} = '{v}': {e}"))),
        }
    }

    fn parse_bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((v, origin)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(invalid(origin, format!("{key} = '{v}': expected true or false"))),
            },
        }
    }
}

/// Fully resolved and validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: KgmParams,
    pub mu_mode: MuMode,
    pub solve: SolveOptions,
    pub radius: f64,
    /// `eps` from `10^{-a}` down to `10^{-b}`.
    pub eps_decades: (f64, f64),
    pub per_decade: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Canonical `key=value` listing of every effective setting except the
    /// output directory; the basis of [`RunConfig::hash`].
    pub canonical: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn resolve(mode: Mode, layers: &Layered) -> Result<Self, ConfigError> {
        if let Some((m, origin)) = layers.get("mode") {
            if m.to_ascii_lowercase() != mode.name() {
                return Err(invalid(origin, format!("config is for mode '{m}' but '{}' was requested", mode.name())));
            }
        }
        let dimension: usize = layers.parse("dimension", 4)?;
        let mass: f64 = layers.parse("mass", 2.0)?;
        let omega: f64 = layers.parse("omega", 1.0)?;
        let q: f64 = layers.parse("q", 3.0)?;
        let (mu, mu_mode) = match layers.get("mu") {
            Some((v, _)) if v.eq_ignore_ascii_case("rule") => {
                if mode == Mode::Solve {
                    return Err(invalid(layers.origin("mu"), "mu = rule is only meaningful for instanton sweeps"));
                }
                (1.0, MuMode::Rule)
            }
            _ => (layers.parse("mu", 1.0)?, MuMode::Fixed),
        };
        let params = KgmParams::new(dimension, mass, omega, mu, q).map_err(|e| {
            let key = match e {
                ParamError::Dimension(_) => "dimension",
                ParamError::Exponent { .. } => {
                    if layers.get("q").is_some() {
                        "q"
                    } else {
                        "dimension"
                    }
                }
                ParamError::Mass(_) => "mass",
                ParamError::Omega(_) => "omega",
                ParamError::Mu(_) => "mu",
            };
            invalid(layers.origin(key), e.to_string())
        })?;

        let d = SolveOptions::default();
        let boundary = match layers.get("phi_boundary") {
            None => d.phi_boundary,
            Some((v, origin)) => match v.to_ascii_lowercase().as_str() {
                "robin" => PhiBoundary::Robin,
                "dirichlet" => PhiBoundary::Dirichlet,
                _ => return Err(invalid(origin, format!("phi_boundary = '{v}': expected robin or dirichlet"))),
            },
        };
        let solve = SolveOptions {
            r_max: layers.parse("rmax", d.r_max)?,
            nodes: layers.parse("nodes", d.nodes)?,
            tol: layers.parse("tol", d.tol)?,
            knots: layers.parse("knots", d.knots)?,
            mu_factor: layers.parse("mu_factor", d.mu_factor)?,
            min_mu_steps: layers.parse("min_mu_steps", d.min_mu_steps)?,
            phi_boundary: boundary,
            override_admissibility: layers.parse_bool("override_admissibility", d.override_admissibility)?,
            path_tol: layers.parse("path_tol", d.path_tol)?,
            max_path_steps: layers.parse("max_path_steps", d.max_path_steps)?,
            max_newton_iterations: layers.parse("max_newton_iterations", d.max_newton_iterations)?,
            seed_width: layers.parse("seed_width", d.seed_width)?,
            check_truncation: layers.parse_bool("check_truncation", d.check_truncation)?,
            check_refinement: layers.parse_bool("check_refinement", d.check_refinement)?,
        };
        let positive = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(layers.origin(key), format!("{key} must be positive and finite, got {v}")))
            }
        };
        positive("rmax", solve.r_max)?;
        positive("tol", solve.tol)?;
        positive("path_tol", solve.path_tol)?;
        positive("seed_width", solve.seed_width)?;
        if solve.nodes < 16 {
            return Err(invalid(layers.origin("nodes"), format!("nodes must be at least 16, got {}", solve.nodes)));
        }
        if solve.knots < 3 {
            return Err(invalid(layers.origin("knots"), format!("knots must be at least 3, got {}", solve.knots)));
        }
        if !(solve.mu_factor > 0.0 && solve.mu_factor < 1.0) {
            return Err(invalid(layers.origin("mu_factor"), format!("mu_factor must lie in (0, 1), got {}", solve.mu_factor)));
        }

        let radius: f64 = layers.parse("radius", 1.0)?;
        positive("radius", radius)?;
        let eps_decades = match layers.get("eps_decades") {
            None => (1.0, 4.0),
            Some((v, origin)) => parse_decades(v).map_err(|m| invalid(origin, format!("eps_decades = '{v}': {m}")))?,
        };
        let per_decade: usize = layers.parse("per_decade", 2)?;
        if per_decade == 0 {
            return Err(invalid(layers.origin("per_decade"), "per_decade must be at least 1"));
        }
        let seed: u64 = layers.parse("seed", 0)?;
        let out = PathBuf::from(layers.get("out").map(|e| e.0.as_str()).unwrap_or("kgm-out"));

        let mut canonical = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            canonical.insert(k.to_string(), v);
        };
        put("mode", mode.name().into());
        put("dimension", dimension.to_string());
        put("mass", mass.to_string());
        put("omega", omega.to_string());
        put("q", q.to_string());
        put("mu", if mu_mode == MuMode::Rule { "rule".into() } else { mu.to_string() });
        put("seed", seed.to_string());
        match mode {
            Mode::Solve => {
                put("rmax", solve.r_max.to_string());
                put("nodes", solve.nodes.to_string());
                put("tol", solve.tol.to_string());
                put("knots", solve.knots.to_string());
                put("mu_factor", solve.mu_factor.to_string());
                put("min_mu_steps", solve.min_mu_steps.to_string());
                put("path_tol", solve.path_tol.to_string());
                put("max_path_steps", solve.max_path_steps.to_string());
                put("max_newton_iterations", solve.max_newton_iterations.to_string());
                put("seed_width", solve.seed_width.to_string());
                put("phi_boundary", format!("{:?}", solve.phi_boundary).to_ascii_lowercase());
                put("override_admissibility", solve.override_admissibility.to_string());
                put("check_truncation", solve.check_truncation.to_string());
                put("check_refinement", solve.check_refinement.to_string());
            }
            Mode::Instanton => {
                put("radius", radius.to_string());
                put("eps_decades", format!("{}:{}", eps_decades.0, eps_decades.1));
                put("per_decade", per_decade.to_string());
            }
            Mode::Verify => {}
        }
        Ok(Self { mode, params, mu_mode, solve, radius, eps_decades, per_decade, seed, out, canonical })
    }

    /// SHA-256 of the canonical listing, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.canonical {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The sweep `eps = 10^{-a}, ..., 10^{-b}`.
    pub fn eps_list(&self) -> Vec<f64> {
        kgm_core::instanton::eps_decades(self.eps_decades.0, self.eps_decades.1, self.per_decade)
    }
}

/// `A:B` with `0 <= A < B`, both in decades.
pub fn parse_decades(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
        return Err("need 0 <= A < B".into());
    }
    Ok((a, b))
}
