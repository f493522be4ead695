//! Subcommand bodies and artifact handling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{derive_seed, CommandName, RunConfig};
use super::sources::{ConstraintSpec, FieldSource};
use super::CliError;
use crate::fem::{FieldFile, ScalarField};
use crate::geometry::{refine_times, BoundaryPartition, Mesh, MeshFile};
use crate::laplace::{
    compatibility_defect, solve_mixed_with, solve_neumann_with, weak_residual, zero_flux, Gauge, MixedProblem,
    NeumannProblem, SolveOptions,
};
use crate::plaplace::{minimality_certificate, solve_p_laplace, PlapOptions, PlapProblem};
use crate::verify::fmt_f64;
use crate::verify::{
    convergence_study, counterexample_punctured, holder_exponent, holder_study, poincare_lower_bound_study,
    poincare_wirtinger_study, ConvergenceProblem, PuncturedSetup, Report,
};

/// Experiments accepted by `verify`.
pub const EXPERIMENTS: [&str; 8] = [
    "counterexample_punctured",
    "manufactured_dirichlet",
    "neumann_harmonic",
    "plap_affine",
    "ibp_smooth",
    "poincare_wirtinger",
    "poincare_lower_bound",
    "holder",
];

const DEFAULT_CERTIFICATE_TRIALS: usize = 100;
const DEFAULT_HOLDER_PAIRS: usize = 1_000_000;
const DEFAULT_SWEEP_PAIRS: usize = 20_000;

/// Files produced by one run, written only after every one of them passes
/// the overwrite check.
struct Artifacts {
    dir: PathBuf,
    hash: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(cfg: &RunConfig, hash: &str) -> Self {
        Self {
            dir: cfg.out_dir(),
            hash: hash.to_string(),
            files: Vec::new(),
        }
    }

    /// Adds a JSON object with `config_hash` set.
    fn json(&mut self, name: &str, mut value: Value) {
        value["config_hash"] = json!(self.hash);
        let mut text = serde_json::to_string_pretty(&value).expect("json values serialize");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn commit(self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::config("out", format!("{}: {e}", self.dir.display())))?;
        for (name, _) in &self.files {
            let path = self.dir.join(name);
            if path.exists() && embedded_hash(&path).as_deref() != Some(self.hash.as_str()) {
                return Err(CliError::Conflict(path));
            }
        }
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(crate::Error::from)?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// The config hash recorded in an artifact, if it carries one.
fn embedded_hash(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    if path.extension().is_some_and(|e| e == "csv") {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let col = reader.headers().ok()?.iter().position(|h| h == "config_hash")?;
        let first = reader.records().next()?.ok()?;
        first.get(col).map(str::to_string)
    } else {
        let value: Value = serde_json::from_str(&text).ok()?;
        value.get("config_hash")?.as_str().map(str::to_string)
    }
}

pub(super) fn execute(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    match cfg.command.expect("command is set before execution") {
        CommandName::Mesh => mesh(cfg, hash),
        CommandName::SolveLaplace => solve_laplace(cfg, hash),
        CommandName::SolveNeumann => solve_neumann(cfg, hash),
        CommandName::SolvePlap => solve_plap(cfg, hash),
        CommandName::Verify => verify(cfg, hash),
        CommandName::Sweep => sweep(cfg, hash),
    }
}

fn mesh_summary(mesh: &Mesh) -> Value {
    json!({
        "n_vertices": mesh.n_vertices(),
        "n_triangles": mesh.n_triangles(),
        "h": mesh.h(),
        "mesh_hash": crate::fem::hash_hex(mesh.hash()),
    })
}

fn mesh(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let mesh = cfg.mesh()?;
    let mut out = Artifacts::new(cfg, hash);
    out.json("mesh.json", json!({ "mesh": MeshFile::from(&mesh), "summary": mesh_summary(&mesh) }));
    out.commit()
}

fn field_or_zero(src: &Option<FieldSource>, mesh: &Mesh, key: &str) -> Result<ScalarField, CliError> {
    match src {
        Some(s) => s.scalar(mesh, key),
        None => Ok(ScalarField::zeros(mesh)),
    }
}

fn solution_json(u: &ScalarField) -> Value {
    json!({ "field": FieldFile::from(u) })
}

fn solve_laplace(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let mesh = cfg.mesh()?;
    let part = cfg.partition(&mesh)?;
    let load = field_or_zero(&cfg.load, &mesh, "load")?;
    let dirichlet = field_or_zero(&cfg.dirichlet, &mesh, "dirichlet")?;
    let flux = cfg.flux.as_ref().map(|f| f.flux(&mesh, &part, "flux")).transpose()?;
    let problem = MixedProblem::new(&mesh, &part, load.clone(), dirichlet, flux.clone())?;
    let opts = SolveOptions {
        rel_tol: cfg.tol,
        ..SolveOptions::default()
    };
    let sol = solve_mixed_with(&problem, &opts)?;
    let residual = weak_residual(&mesh, &part, &sol.field, &load, flux.as_ref())?;
    let mut out = Artifacts::new(cfg, hash);
    out.json("solution.json", solution_json(&sol.field));
    out.json(
        "report.json",
        json!({
            "command": "solve-laplace",
            "mesh": mesh_summary(&mesh),
            "cg_iterations": sol.iterations,
            "cg_relative_residual": sol.cg_relative_residual,
            "weak_residual": residual,
        }),
    );
    out.commit()
}

fn solve_neumann(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let mesh = cfg.mesh()?;
    if cfg.partition.is_some() {
        log::warn!("solve-neumann treats the whole boundary as Neumann; `partition` is ignored");
    }
    let part = BoundaryPartition::all_neumann(&mesh);
    let load = field_or_zero(&cfg.load, &mesh, "load")?;
    let flux = match &cfg.flux {
        Some(f) => f.flux(&mesh, &part, "flux")?,
        None => zero_flux(&mesh),
    };
    let defect = compatibility_defect(&mesh, &load, &flux)?;
    let problem = NeumannProblem::new(&mesh, load, flux)?;
    let tolerance = problem.default_tolerance()?;
    let opts = SolveOptions {
        rel_tol: cfg.tol,
        ..SolveOptions::default()
    };
    let sol = solve_neumann_with(&problem, Gauge::ZeroMean, &opts)?;
    let mut out = Artifacts::new(cfg, hash);
    out.json("solution.json", solution_json(&sol.field));
    out.json(
        "report.json",
        json!({
            "command": "solve-neumann",
            "mesh": mesh_summary(&mesh),
            "defect": defect,
            "tolerance": tolerance,
            "gauge": "zero_mean",
            "cg_iterations": sol.iterations,
            "cg_relative_residual": sol.cg_relative_residual,
        }),
    );
    out.commit()
}

fn plap_options(cfg: &RunConfig) -> PlapOptions {
    let d = PlapOptions::default();
    PlapOptions {
        tol: cfg.tol.unwrap_or(d.tol),
        eps_final: cfg.eps_final.unwrap_or(d.eps_final),
        eps_start: d.eps_start.max(cfg.eps_final.unwrap_or(0.0)),
        p_step: cfg.p_step.unwrap_or(d.p_step),
        max_outer: cfg.max_outer.unwrap_or(d.max_outer),
        seed: cfg.seed.map(|s| derive_seed(s, "plap/start")),
    }
}

fn constraint_vertices(cfg: &RunConfig, mesh: &Mesh, part: &BoundaryPartition) -> Result<Vec<usize>, CliError> {
    cfg.constraint
        .clone()
        .unwrap_or_else(|| ConstraintSpec::Region("boundary".into()))
        .vertices(mesh, part)
}

fn required_p(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.p
        .map(|p| p.0)
        .ok_or_else(|| CliError::config("p", "this command needs an exponent p"))
}

fn solve_plap(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let p = required_p(cfg)?;
    let mesh = cfg.mesh()?;
    let part = cfg.partition(&mesh)?;
    let datum = cfg
        .datum
        .as_ref()
        .ok_or_else(|| CliError::config("datum", "solve-plap needs a datum field"))?
        .scalar(&mesh, "datum")?;
    let constraint = constraint_vertices(cfg, &mesh, &part)?;
    let problem = PlapProblem::new(&mesh, constraint, datum, p)?.with_options(plap_options(cfg))?;
    let (u, mut report) = solve_p_laplace(&problem)?;
    let trials = cfg.certificate_trials.unwrap_or(DEFAULT_CERTIFICATE_TRIALS);
    if trials > 0 {
        let seed = derive_seed(cfg.seed(), "plap/certificate");
        report.certificate = minimality_certificate(&mesh, &u, p, &problem.constraint, trials, seed)?.certificate;
    }
    let passed = report.certificate.as_ref().map_or(true, |c| c.passed);
    let mut out = Artifacts::new(cfg, hash);
    out.json("solution.json", solution_json(&u));
    out.json(
        "report.json",
        json!({
            "command": "solve-plap",
            "mesh": mesh_summary(&mesh),
            "p": report.p,
            "energy": report.energy,
            "stationarity": report.stationarity,
            "iterations": report.iterations,
            "certificate": report.certificate,
            "trace": report.trace,
        }),
    );
    out.commit()?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed("minimality certificate found a lower-energy perturbation".into()))
    }
}

/// Runs one named experiment with the config's parameters.
pub fn run_experiment(cfg: &RunConfig, name: &str) -> Result<Report, CliError> {
    let seed = cfg.seed();
    let levels = |default: &[usize]| cfg.levels.clone().unwrap_or_else(|| default.to_vec());
    let report = match name {
        "counterexample_punctured" => {
            let d = PuncturedSetup::default();
            let p = cfg.p.map_or(d.p, |p| p.0);
            if p <= 2.0 {
                return Err(CliError::config(
                    "p",
                    format!("the punctured-disk experiment needs p > 2 (p_M(A) = 2), got {p}"),
                ));
            }
            counterexample_punctured(&PuncturedSetup {
                p,
                r_in: cfg.r_in.clone().unwrap_or(d.r_in),
                n_angular: levels(&d.n_angular),
                ..d
            })?
        }
        "manufactured_dirichlet" | "neumann_harmonic" | "ibp_smooth" => {
            let problem: ConvergenceProblem = name.parse()?;
            convergence_study(problem, &levels(&[8, 16, 32, 64]))?
        }
        "plap_affine" => convergence_study(ConvergenceProblem::PlapAffine, &levels(&[4, 8, 16]))?,
        "poincare_wirtinger" => poincare_wirtinger_study(&levels(&[8, 16, 32, 64]))?,
        "poincare_lower_bound" => {
            let p = cfg.p.map_or(2.0, |p| p.0);
            let seeds: Vec<u64> = (0..3).map(|k| derive_seed(seed, &format!("poincare_lower_bound/{k}"))).collect();
            poincare_lower_bound_study(p, &levels(&[4, 8, 16]), &seeds)?
        }
        "holder" => holder_study(
            cfg.n_pairs.unwrap_or(DEFAULT_HOLDER_PAIRS),
            derive_seed(seed, "holder"),
        )?,
        other => {
            return Err(CliError::config(
                "experiment",
                format!("unknown experiment `{other}` (known: {})", EXPERIMENTS.join(", ")),
            ))
        }
    };
    Ok(report)
}

fn verify(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let name = cfg
        .experiment
        .clone()
        .ok_or_else(|| CliError::config("experiment", "verify needs an experiment name"))?;
    let report = run_experiment(cfg, &name)?;
    let mut out = Artifacts::new(cfg, hash);
    out.raw(&format!("{name}.csv"), report.to_csv(Some(hash))?);
    let summary = serde_json::to_value(report.summary(Some(hash))).map_err(crate::Error::from)?;
    out.json(&format!("{name}.json"), summary);
    out.commit()?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{name}: failed checks {}", failed.join(", "))))
    }
}

/// Columns of `sweep.csv`, followed by `config_hash`.
pub const SWEEP_COLUMNS: [&str; 10] = [
    "p",
    "level",
    "h",
    "n_vertices",
    "energy",
    "stationarity",
    "iterations",
    "alpha",
    "fit_quality",
    "status",
];

/// Result of a sweep: the CSV bytes and how many cells failed.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub csv: Vec<u8>,
    pub cells: usize,
    pub failed: usize,
}

struct Cell {
    energy: f64,
    stationarity: f64,
    iterations: usize,
    alpha: f64,
    fit_quality: f64,
}

fn sweep_cell(cfg: &RunConfig, mesh: &Mesh, p: f64, level: usize) -> Result<Cell, CliError> {
    let part = cfg.partition(mesh)?;
    let datum = cfg
        .datum
        .clone()
        .unwrap_or_else(|| FieldSource::Named("x".into()))
        .scalar(mesh, "datum")?;
    let constraint = constraint_vertices(cfg, mesh, &part)?;
    let mut opts = plap_options(cfg);
    let label = format!("sweep/p={p:?}/level={level}");
    opts.seed = cfg.seed.map(|s| derive_seed(s, &format!("{label}/start")));
    let (u, report) = solve_p_laplace(&PlapProblem::new(mesh, constraint, datum, p)?.with_options(opts)?)?;
    let fit = holder_exponent(
        mesh,
        &u,
        cfg.n_pairs.unwrap_or(DEFAULT_SWEEP_PAIRS),
        derive_seed(cfg.seed(), &format!("{label}/holder")),
    )?;
    Ok(Cell {
        energy: report.energy,
        stationarity: report.stationarity,
        iterations: report.iterations,
        alpha: fit.alpha.unwrap_or(f64::NAN),
        fit_quality: fit.fit_quality,
    })
}

/// Solves every `(p, level)` cell, in parallel on `threads` workers, and
/// assembles the table ordered by `p`, then level. Cell failures are
/// recorded in the `status` column.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepTable, CliError> {
    let mut ps: Vec<f64> = cfg.p_list.iter().flatten().map(|p| p.0).collect();
    if ps.is_empty() {
        return Err(CliError::config("p_list", "sweep needs a nonempty p_list"));
    }
    ps.sort_by(f64::total_cmp);
    let mut levels = cfg.levels.clone().unwrap_or_else(|| vec![0, 1, 2]);
    levels.sort_unstable();
    let base = cfg.mesh()?;
    let meshes: Vec<Mesh> = levels.iter().map(|&l| refine_times(&base, l)).collect();
    let hash = cfg.hash();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    let jobs: Vec<(f64, usize)> = ps
        .iter()
        .flat_map(|&p| (0..levels.len()).map(move |i| (p, i)))
        .collect();
    let results: Vec<Result<Cell, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, i)| sweep_cell(cfg, &meshes[i], p, levels[i]))
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
    header.push("config_hash");
    w.write_record(&header).map_err(crate::Error::from)?;
    let mut failed = 0;
    for (&(p, i), res) in jobs.iter().zip(&results) {
        let mesh = &meshes[i];
        let (nums, status) = match res {
            Ok(c) => (
                [c.energy, c.stationarity, c.iterations as f64, c.alpha, c.fit_quality],
                "ok".to_string(),
            ),
            Err(e) => {
                failed += 1;
                log::warn!("sweep cell p={p} level={}: {e}", levels[i]);
                ([f64::NAN; 5], e.record(None)["error"].as_str().unwrap_or("error").to_string())
            }
        };
        let mut rec = vec![fmt_f64(p), levels[i].to_string(), fmt_f64(mesh.h()), mesh.n_vertices().to_string()];
        rec.extend(nums[..2].iter().map(|&v| fmt_f64(v)));
        rec.push(match res {
            Ok(c) => c.iterations.to_string(),
            Err(_) => String::new(),
        });
        rec.extend(nums[3..].iter().map(|&v| fmt_f64(v)));
        rec.push(status);
        rec.push(hash.clone());
        w.write_record(&rec).map_err(crate::Error::from)?;
    }
    let csv = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(SweepTable {
        csv,
        cells: jobs.len(),
        failed,
    })
}

fn sweep(cfg: &RunConfig, hash: &str) -> Result<(), CliError> {
    let table = run_sweep(cfg)?;
    let mut out = Artifacts::new(cfg, hash);
    out.raw("sweep.csv", table.csv);
    out.json("sweep.json", json!({ "cells": table.cells, "failed": table.failed }));
    out.commit()?;
    if table.failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} of {} sweep cells failed", table.failed, table.cells)))
    }
}
