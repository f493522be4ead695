//! Refinement studies against closed-form solutions.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{fit_rate, Check, Report};
use crate::error::{Error, Result};
use crate::fem::{ibp_residual, l2_error, BoundaryTrace, Region, ScalarField, VectorField};
use crate::geometry::{build_unit_square, BoundaryPartition, Mesh};
use crate::laplace::{solve_mixed, solve_neumann, weak_residual, MixedProblem, NeumannProblem};
use crate::plaplace::{solve_p_laplace, PlapProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceProblem {
    /// `u = sin(πx) sin(πy)` with zero Dirichlet data on the unit square.
    ManufacturedDirichlet,
    /// `u = x² − y²` from its normal derivative, zero-mean gauge.
    NeumannHarmonic,
    /// `u = x` from its values on the left and right sides, several `p`.
    PlapAffine,
    /// Integration by parts for `u = x`, `β = (x, 0)`, analytic divergence.
    IbpSmooth,
}

impl ConvergenceProblem {
    pub const ALL: [ConvergenceProblem; 4] = [
        Self::ManufacturedDirichlet,
        Self::NeumannHarmonic,
        Self::PlapAffine,
        Self::IbpSmooth,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::ManufacturedDirichlet => "manufactured_dirichlet",
            Self::NeumannHarmonic => "neumann_harmonic",
            Self::PlapAffine => "plap_affine",
            Self::IbpSmooth => "ibp_smooth",
        }
    }
}

impl FromStr for ConvergenceProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown convergence problem `{s}`")))
    }
}

/// Slack for a rate that is exactly an integer up to floating-point error.
const RATE_ROUNDING: f64 = 1e-9;

const PLAP_EXPONENTS: [f64; 5] = [2.0, 3.0, 4.0, 6.0, 10.0];

/// Runs `problem` on unit-square meshes with `n × n` cells for each `n` in
/// `levels`.
pub fn convergence_study(problem: ConvergenceProblem, levels: &[usize]) -> Result<Report> {
    if levels.len() < 3 {
        return Err(Error::invalid("a convergence study needs at least 3 levels"));
    }
    let meshes = levels
        .iter()
        .map(|&n| build_unit_square(n))
        .collect::<Result<Vec<_>>>()?;
    match problem {
        ConvergenceProblem::ManufacturedDirichlet => manufactured(&meshes),
        ConvergenceProblem::NeumannHarmonic => neumann(&meshes),
        ConvergenceProblem::PlapAffine => plap_affine(&meshes),
        ConvergenceProblem::IbpSmooth => ibp_smooth(&meshes),
    }
    .map(|r| r.param("levels", levels))
}

fn sinsin(p: [f64; 2]) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

fn manufactured(meshes: &[Mesh]) -> Result<Report> {
    let mut report = Report::new("manufactured_dirichlet", &["l2_error", "weak_residual"]);
    let mut worst_residual: f64 = 0.0;
    for (level, m) in meshes.iter().enumerate() {
        let part = BoundaryPartition::all_dirichlet(m);
        let g = ScalarField::from_fn(m, |p| -2.0 * PI * PI * sinsin(p));
        let prob = MixedProblem::new(m, &part, g.clone(), ScalarField::zeros(m), None)?;
        let u = solve_mixed(&prob)?;
        let res = weak_residual(m, &part, &u, &g, None)?;
        worst_residual = worst_residual.max(res);
        report.push_row(level, m.h(), vec![l2_error(m, &u, sinsin)?, res]);
    }
    finish_rate(&mut report, "l2_error", 2.0, 0.3);
    report.checks.push(Check::at_most("weak_residual", worst_residual, 1e-10));
    Ok(report)
}

fn neumann(meshes: &[Mesh]) -> Result<Report> {
    let mut report = Report::new("neumann_harmonic", &["l2_error"]);
    for (level, m) in meshes.iter().enumerate() {
        let part = BoundaryPartition::all_neumann(m);
        let theta = BoundaryTrace::edge_data(m, &part, Region::Whole, |x, n| 2.0 * x[0] * n[0] - 2.0 * x[1] * n[1])?;
        let u = solve_neumann(&NeumannProblem::new(m, ScalarField::zeros(m), theta)?)?;
        // x² − y² has zero mean on the unit square
        report.push_row(level, m.h(), vec![l2_error(m, &u, |p| p[0] * p[0] - p[1] * p[1])?]);
    }
    finish_rate(&mut report, "l2_error", 2.0, 0.3);
    Ok(report)
}

fn plap_affine(meshes: &[Mesh]) -> Result<Report> {
    let columns: Vec<String> = PLAP_EXPONENTS.iter().map(|p| format!("max_error_p{p}")).collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = Report::new("plap_affine", &cols).param("p", PLAP_EXPONENTS);
    let mut worst: f64 = 0.0;
    for (level, m) in meshes.iter().enumerate() {
        let sides: Vec<usize> = (0..m.n_vertices())
            .filter(|&v| {
                let x = m.vertices()[v][0];
                x == 0.0 || x == 1.0
            })
            .collect();
        let f = ScalarField::from_fn(m, |p| p[0]);
        let mut row = Vec::new();
        for p in PLAP_EXPONENTS {
            let (u, _) = solve_p_laplace(&PlapProblem::new(m, sides.iter().copied(), f.clone(), p)?)?;
            let err = u
                .values()
                .iter()
                .zip(f.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            row.push(err);
        }
        report.push_row(level, m.h(), row);
    }
    report.tolerance = 1e-6;
    report.checks.push(Check::at_most("max_error", worst, 1e-6));
    Ok(report)
}

fn ibp_smooth(meshes: &[Mesh]) -> Result<Report> {
    let mut report = Report::new("ibp_smooth", &["residual"]);
    for (level, m) in meshes.iter().enumerate() {
        let part = BoundaryPartition::all_dirichlet(m);
        let u = ScalarField::from_fn(m, |p| p[0]);
        let beta = VectorField::from_fn(m, |p| [p[0], 0.0]);
        let div = ScalarField::constant(m, 1.0);
        let terms = ibp_residual(m, &part, &u, &beta, &div, Region::Whole)?;
        report.push_row(level, m.h(), vec![terms.residual().abs()]);
    }
    let h: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let rate = fit_rate(&h, &report.column("residual").expect("column"));
    report.fitted_value = rate;
    report.tolerance = 1.0;
    report
        .checks
        .push(Check::at_least("rate", rate.unwrap_or(f64::NEG_INFINITY), 1.0 - RATE_ROUNDING));
    Ok(report)
}

fn finish_rate(report: &mut Report, column: &str, target: f64, tol: f64) {
    let h: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let rate = fit_rate(&h, &report.column(column).expect("column"));
    report.fitted_value = rate;
    report.tolerance = tol;
    report
        .checks
        .push(Check::absolute("rate", rate.unwrap_or(f64::NAN), target, tol));
}
