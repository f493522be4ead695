//! The `varfem` command line: configuration, orchestration and artifacts.
//!
//! Exit codes: `0` success, `1` numerical failure (non-convergence,
//! incompatible data, failed checks), `2` configuration error. Every
//! failure also prints a one-line JSON error record on stderr and, when the
//! output directory is usable, writes it to `error.json`.

mod commands;
pub mod config;
pub mod sources;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use commands::{run_experiment, run_sweep, SweepTable, EXPERIMENTS, SWEEP_COLUMNS};
pub use config::{derive_seed, parse_config_file, parse_config_str, CommandName, Exponent, PartitionSpec, RunConfig};
pub use sources::{ConstraintSpec, FieldSource, ANALYTIC_NAMES};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "varfem", version, about = "P1 finite elements for Laplace and p-Laplace problems")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Args, Default, Clone)]
pub struct PlapFlags {
    #[arg(long = "p")]
    pub p: Option<f64>,
    #[arg(long)]
    pub eps_final: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Build the configured mesh and write it as JSON.
    Mesh,
    /// Mixed Dirichlet/Neumann Laplace solve.
    SolveLaplace,
    /// Pure Neumann Laplace solve with the zero-mean gauge.
    SolveNeumann,
    /// Trace-constrained p-Dirichlet minimization.
    SolvePlap(PlapFlags),
    /// Run a named experiment and write its report.
    Verify {
        experiment: String,
        #[command(flatten)]
        plap: PlapFlags,
    },
    /// Grid of p-Laplace solves and Hölder fits over p and mesh level.
    Sweep(PlapFlags),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error{}: {message}", path.as_ref().map(|p| format!(" at `{p}`")).unwrap_or_default())]
    Config { path: Option<String>, message: String },
    #[error("{0}")]
    Lib(#[from] Error),
    #[error("refusing to overwrite {} written by a different configuration", .0.display())]
    Conflict(PathBuf),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            path: Some(path.to_string()),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 1,
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Conflict(_) => "artifact_conflict",
            CliError::Failed(_) => "check_failed",
            CliError::Lib(e) => match e {
                Error::Incompatible { .. } => "compatibility",
                Error::NonConvergence { .. } => "non_convergence",
                Error::PlapNotConverged { .. } => "plap_not_converged",
                Error::Io(_) => "io",
                Error::MeshFormat(_) => "mesh_format",
                _ => "invalid_input",
            },
        }
    }

    /// Machine-readable record of the failure.
    pub fn record(&self, config_hash: Option<&str>) -> serde_json::Value {
        let mut rec = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Config { path: Some(p), .. } = self {
            rec["field"] = json!(p);
        }
        match self {
            CliError::Lib(Error::Incompatible { defect, tolerance }) => {
                rec["defect"] = json!(defect);
                rec["tolerance"] = json!(tolerance);
            }
            CliError::Lib(Error::PlapNotConverged { stationarity, .. }) => {
                rec["stationarity"] = json!(stationarity);
            }
            _ => {}
        }
        if let Some(h) = config_hash {
            rec["config_hash"] = json!(h);
        }
        rec
    }
}

/// Merges the file config with command-line flags (flags win).
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => RunConfig::default(),
    };
    let (name, plap, experiment) = match &cli.command {
        CommandArgs::Mesh => (CommandName::Mesh, None, None),
        CommandArgs::SolveLaplace => (CommandName::SolveLaplace, None, None),
        CommandArgs::SolveNeumann => (CommandName::SolveNeumann, None, None),
        CommandArgs::SolvePlap(f) => (CommandName::SolvePlap, Some(f), None),
        CommandArgs::Verify { experiment, plap } => (CommandName::Verify, Some(plap), Some(experiment)),
        CommandArgs::Sweep(f) => (CommandName::Sweep, Some(f), None),
    };
    if let Some(file_cmd) = cfg.command.filter(|c| *c != name) {
        log::warn!("config names command `{}`; running `{}`", file_cmd.as_str(), name.as_str());
    }
    cfg.command = Some(name);
    if let Some(e) = experiment {
        cfg.experiment = Some(e.clone());
    }
    if let Some(f) = plap {
        if let Some(p) = f.p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(CliError::config("p", format!("p must be a finite number greater than 1, got {p}")));
            }
            cfg.p = Some(Exponent(p));
        }
        cfg.eps_final = f.eps_final.or(cfg.eps_final);
        cfg.tol = f.tol.or(cfg.tol);
        cfg.max_outer = f.max_outer.or(cfg.max_outer);
    }
    cfg.out = cli.out.clone().or(cfg.out);
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.threads = cli.threads.or(cfg.threads);
    Ok(cfg)
}

fn init_logging() {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        builder.write_style(env_logger::WriteStyle::Never);
    }
    // a second initialization (tests, embedding) is harmless
    let _ = builder.try_init();
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    init_logging();
    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => return report_failure(&e, None, cli.out.as_deref()),
    };
    let hash = cfg.hash();
    match commands::execute(&cfg, &hash) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_failure(&e, Some(&hash), Some(&cfg.out_dir())),
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 2 {
                let err = CliError::Config {
                    path: None,
                    message: e.kind().to_string(),
                };
                eprintln!("{}", err.record(None));
            }
            ExitCode::from(code)
        }
    }
}

fn report_failure(e: &CliError, hash: Option<&str>, out: Option<&Path>) -> ExitCode {
    let record = e.record(hash);
    eprintln!("{record}");
    if let Some(dir) = out {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
        }
    }
    ExitCode::from(e.exit_code())
}
