//! Mode execution and artifact export.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kgm_core::instanton::{self, InstantonError, InstantonReport, MuMode};
use kgm_core::params::{classify, AdmissibilityVerdict, KgmParams};
use kgm_core::phi;
use kgm_core::saddle::{self, SaddleResult, SolveError, SolverTrace};
use kgm_core::verify::{self, VerifyReport};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig};

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Runtime failure not covered below, or a verification check failed.
    pub const FAILURE: i32 = 1;
    pub const REFUSED: i32 = 2;
    pub const NO_CONVERGENCE: i32 = 3;
    pub const INVALID_CONFIG: i32 = 4;
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep: {0}")]
    Sweep(InstantonError),
    #[error("instanton computation failed: {0}")]
    Instanton(InstantonError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Sweep(_) => exit::INVALID_CONFIG,
            RunError::Instanton(_) | RunError::Io { .. } => exit::FAILURE,
        }
    }
}

impl From<InstantonError> for RunError {
    fn from(e: InstantonError) -> Self {
        match e {
            InstantonError::Epsilon(_)
            | InstantonError::Radius(_)
            | InstantonError::Dimension(_)
            | InstantonError::MuRuleRange(_)
            | InstantonError::SweepTooShort { .. }
            | InstantonError::GridTooLarge(_)
            | InstantonError::UnderResolved { .. }
            | InstantonError::GridTooSmall { .. } => RunError::Sweep(e),
            other => RunError::Instanton(other),
        }
    }
}

/// Result of a completed run: exit status, one-line summary, files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    config_hash: String,
    config: &'a std::collections::BTreeMap<String, String>,
    status: &'a str,
    result: T,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_report<T: Serialize>(cfg: &RunConfig, status: &str, result: T) -> Result<PathBuf, RunError> {
    let path = cfg.out.join("report.json");
    let env = Envelope {
        tool: "kgm",
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        config_hash: cfg.hash(),
        config: &cfg.canonical,
        status,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env).expect("report types serialize");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    match cfg.mode {
        Mode::Solve => run_solve(cfg),
        Mode::Instanton => run_instanton(cfg),
        Mode::Verify => run_verify(cfg),
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    params: &'a KgmParams,
    admissibility: &'a AdmissibilityVerdict,
    admissibility_overridden: bool,
    energy: f64,
    breakdown: &'a kgm_core::EnergyBreakdown,
    residual: f64,
    iterations: usize,
    path_steps: usize,
    max_abs_u: f64,
    sobolev_constant: f64,
    threshold: f64,
    below_threshold: bool,
    smallest_mu: f64,
    continuation: &'a [saddle::ContinuationStep],
    path_level_history: &'a [f64],
    newton_history: &'a [f64],
    phi_diagnostics: &'a phi::PhiDiagnostics,
    phi_band_ok: bool,
    geometry: &'a saddle::GeometryCheck,
    truncation: &'a Option<saddle::TruncationCheck>,
    refinement: &'a Option<saddle::RefinementCheck>,
    options: &'a saddle::SolveOptions,
}

#[derive(Serialize)]
struct SolveFailure<'a> {
    params: &'a KgmParams,
    admissibility: Option<AdmissibilityVerdict>,
    error: String,
    trace: Option<&'a SolverTrace>,
    options: &'a saddle::SolveOptions,
}

fn run_solve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let p = &cfg.params;
    match saddle::solve(p, &cfg.solve) {
        Ok(r) => {
            let mut files = vec![write_solve_report(cfg, &r)?];
            let profile = cfg.out.join("profile.csv");
            let mut w = create(&profile)?;
            write_profile_csv(&r, &mut w).and_then(|_| w.flush()).map_err(io_err(&profile))?;
            files.push(profile);
            let phi_path = cfg.out.join("phi.csv");
            let mut w = create(&phi_path)?;
            phi::write_phi_csv(&r.phi, &mut w).and_then(|_| w.flush()).map_err(io_err(&phi_path))?;
            files.push(phi_path);
            Ok(Outcome {
                exit_code: exit::SUCCESS,
                summary: format!(
                    "converged: energy {:.10} (threshold {:.6}), residual {:.3e}, {} Newton iterations",
                    r.energy, r.threshold, r.residual, r.iterations
                ),
                files,
            })
        }
        Err(e) => {
            let (status, code) = match &e {
                SolveError::Refused { .. } => ("refused", exit::REFUSED),
                SolveError::Param(_) => ("invalid", exit::INVALID_CONFIG),
                _ => ("no_convergence", exit::NO_CONVERGENCE),
            };
            let trace = match &e {
                SolveError::NoConvergence { trace, .. } => Some(trace.as_ref()),
                _ => None,
            };
            let failure = SolveFailure {
                params: p,
                admissibility: classify(p).ok(),
                error: e.to_string(),
                trace,
                options: &cfg.solve,
            };
            let report = write_report(cfg, status, failure)?;
            Ok(Outcome { exit_code: code, summary: format!("{status}: {e}"), files: vec![report] })
        }
    }
}

fn write_solve_report(cfg: &RunConfig, r: &SaddleResult) -> Result<PathBuf, RunError> {
    let summary = SolveSummary {
        params: &cfg.params,
        admissibility: &r.verdict,
        admissibility_overridden: r.admissibility_overridden,
        energy: r.energy,
        breakdown: &r.breakdown,
        residual: r.residual,
        iterations: r.iterations,
        path_steps: r.path_steps,
        max_abs_u: r.profile.max_abs(),
        sobolev_constant: r.sobolev_constant,
        threshold: r.threshold,
        below_threshold: r.below_threshold,
        smallest_mu: r.smallest_mu,
        continuation: &r.continuation,
        path_level_history: &r.path_level_history,
        newton_history: &r.newton_history,
        phi_diagnostics: &r.phi_diagnostics,
        phi_band_ok: r.phi_diagnostics.bound_violation <= phi::bound_tolerance(cfg.params.omega()),
        geometry: &r.geometry,
        truncation: &r.truncation,
        refinement: &r.refinement,
        options: &cfg.solve,
    };
    write_report(cfg, "converged", summary)
}

/// `r,u` rows with full-precision values.
pub fn write_profile_csv<W: Write>(r: &SaddleResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,u")?;
    for (x, u) in r.profile.grid().nodes().iter().zip(r.profile.values()) {
        writeln!(out, "{x:e},{u:e}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InstantonSummary<'a> {
    params: &'a KgmParams,
    mu_mode: MuMode,
    admissibility: Option<AdmissibilityVerdict>,
    report: &'a InstantonReport,
}

fn run_instanton(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let eps = cfg.eps_list();
    let rep = instanton::instanton_sweep(&cfg.params, &eps, cfg.radius, cfg.mu_mode)?;
    let csv = cfg.out.join("instanton.csv");
    let mut w = create(&csv)?;
    write_instanton_csv(&rep, &mut w).and_then(|_| w.flush()).map_err(io_err(&csv))?;
    let summary = InstantonSummary {
        params: &cfg.params,
        mu_mode: cfg.mu_mode,
        admissibility: classify(&cfg.params).ok(),
        report: &rep,
    };
    let report = write_report(cfg, "completed", summary)?;
    let passed = rep.verdicts.iter().filter(|v| v.passed).count();
    Ok(Outcome {
        exit_code: exit::SUCCESS,
        summary: format!(
            "{} eps values, min sup J {:.8} vs threshold {:.8}; {passed}/{} verdicts pass",
            eps.len(),
            rep.min_sup_j,
            rep.threshold,
            rep.verdicts.len()
        ),
        files: vec![report, csv],
    })
}

/// `epsilon,X_eps,supJ,I_eps,annulus` rows.
pub fn write_instanton_csv<W: Write>(rep: &InstantonReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "epsilon,X_eps,supJ,I_eps,annulus")?;
    for r in &rep.rows {
        writeln!(out, "{:e},{:e},{:e},{:e},{:e}", r.epsilon, r.x_eps, r.sup_j, r.i_eps, r.annulus)?;
    }
    Ok(())
}

fn run_verify(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let rep: VerifyReport = verify::run(cfg.seed);
    let ok = rep.all_passed();
    let report = write_report(cfg, if ok { "passed" } else { "failed" }, &rep)?;
    let mut summary = format!("{}/{} checks passed", rep.passed, rep.total);
    for c in rep.checks.iter().filter(|c| !c.passed) {
        summary.push_str(&format!("\n  FAILED {}: worst {:e} (tolerance {:e})", c.name, c.worst, c.tolerance));
    }
    Ok(Outcome { exit_code: if ok { exit::SUCCESS } else { exit::FAILURE }, summary, files: vec![report] })
}
