//! Command-line front end for `kgm-core`: `solve`, `instanton` and `verify`
//! runs configured by flags and flat `key=value` files, writing JSON
//! reports and CSV profiles.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Layered, Mode, RunConfig};
pub use run::{exit, Outcome, RunError};

#[derive(Debug, Parser)]
#[command(name = "kgm", version, about = "Radial Klein-Gordon-Maxwell solver and instanton estimates")]
pub struct Cli {
    /// Flat key=value config file ('#' comments); flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory for report.json and CSV files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for randomized suites.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a mountain-pass solution and write its profile.
    Solve(SolveArgs),
    /// Sweep cut-off instantons over epsilon and evaluate the threshold estimates.
    Instanton(InstantonArgs),
    /// Run the seeded invariant suite.
    Verify,
}

#[derive(Debug, Args, Default)]
pub struct PhysicsArgs {
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Newton residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub knots: Option<usize>,
    #[arg(long)]
    pub mu_factor: Option<f64>,
    #[arg(long)]
    pub path_tol: Option<f64>,
    /// robin or dirichlet.
    #[arg(long)]
    pub phi_boundary: Option<String>,
    /// Solve even when the existence hypotheses fail.
    #[arg(long)]
    pub override_admissibility: bool,
    /// Skip the r_max -> 1.5 r_max re-solve.
    #[arg(long)]
    pub skip_truncation_check: bool,
    /// Skip the n -> 2n refinement re-solve.
    #[arg(long)]
    pub skip_refinement_check: bool,
}

#[derive(Debug, Args)]
pub struct InstantonArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// A number, or `rule` for the dimension-dependent choice of mu.
    #[arg(long)]
    pub mu: Option<String>,
    /// Cutoff radius.
    #[arg(long = "R", visible_alias = "radius")]
    pub radius: Option<f64>,
    /// Sweep eps = 10^-A .. 10^-B.
    #[arg(long, value_name = "A:B")]
    pub eps_decades: Option<String>,
    #[arg(long)]
    pub per_decade: Option<usize>,
}

fn physics(layers: &mut Layered, p: &PhysicsArgs) {
    if let Some(v) = p.dimension {
        layers.set("dimension", v, "dimension");
    }
    if let Some(v) = p.mass {
        layers.set("mass", v, "mass");
    }
    if let Some(v) = p.omega {
        layers.set("omega", v, "omega");
    }
    if let Some(v) = p.q {
        layers.set("q", v, "q");
    }
}

/// Resolve defaults, the config file and flags into a [`RunConfig`].
pub fn resolve(cli: &Cli) -> Result<RunConfig, config::ConfigError> {
    let mut layers = match &cli.config {
        Some(path) => Layered::read_file(path)?,
        None => Layered::default(),
    };
    if let Some(out) = &cli.out {
        layers.set("out", out.display(), "out");
    }
    if let Some(seed) = cli.seed {
        layers.set("seed", seed, "seed");
    }
    let mode = match &cli.command {
        Command::Solve(a) => {
            physics(&mut layers, &a.physics);
            let pairs: [(&str, Option<String>); 7] = [
                ("mu", a.mu.map(|v| v.to_string())),
                ("rmax", a.rmax.map(|v| v.to_string())),
                ("nodes", a.nodes.map(|v| v.to_string())),
                ("tol", a.tol.map(|v| v.to_string())),
                ("knots", a.knots.map(|v| v.to_string())),
                ("mu_factor", a.mu_factor.map(|v| v.to_string())),
                ("path_tol", a.path_tol.map(|v| v.to_string())),
            ];
            for (k, v) in pairs {
                if let Some(v) = v {
                    layers.set(k, v, &k.replace('_', "-"));
                }
            }
            if let Some(b) = &a.phi_boundary {
                layers.set("phi_boundary", b, "phi-boundary");
            }
            if a.override_admissibility {
                layers.set("override_admissibility", true, "override-admissibility");
            }
            if a.skip_truncation_check {
                layers.set("check_truncation", false, "skip-truncation-check");
            }
            if a.skip_refinement_check {
                layers.set("check_refinement", false, "skip-refinement-check");
            }
            Mode::Solve
        }
        Command::Instanton(a) => {
            physics(&mut layers, &a.physics);
            if let Some(v) = &a.mu {
                layers.set("mu", v, "mu");
            }
            if let Some(v) = a.radius {
                layers.set("radius", v, "R");
            }
            if let Some(v) = &a.eps_decades {
                layers.set("eps_decades", v, "eps-decades");
            }
            if let Some(v) = a.per_decade {
                layers.set("per_decade", v, "per-decade");
            }
            Mode::Instanton
        }
        Command::Verify => Mode::Verify,
    };
    RunConfig::resolve(mode, &layers)
}

/// Parse arguments, run, and report to stdout/stderr. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID_CONFIG } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::INVALID_CONFIG;
        }
    };
    match run::run(&cfg) {
        Ok(outcome) => {
            if outcome.exit_code == exit::SUCCESS {
                println!("{}", outcome.summary);
            } else {
                eprintln!("{}", outcome.summary);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
