//! Multi-case experiments assembled from the single-mesh estimators.

use std::f64::consts::PI;

use super::{holder_exponent, poincare_constant_2, poincare_lower_bound_nested, Check, PoincareMode, Report};
use crate::error::{Error, Result};
use crate::fem::{Region, ScalarField};
use crate::geometry::{build_cusp, build_disk, build_rectangle, build_unit_square, refine, BoundaryPartition, Mesh};
use crate::plaplace::{solve_p_laplace, PlapProblem};

/// Successive red refinements of `base`, one per entry of `levels`.
///
/// `levels` are cell counts per unit length and must double.
fn nested(base: Mesh, levels: &[usize]) -> Result<Vec<Mesh>> {
    if levels.is_empty() {
        return Err(Error::invalid("need at least one level"));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::invalid("nested levels must double, e.g. [8, 16, 32]"));
    }
    let mut meshes = vec![base];
    for _ in 1..levels.len() {
        let next = refine(meshes.last().expect("nonempty"));
        meshes.push(next);
    }
    Ok(meshes)
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

/// Wirtinger constants of the unit square and the 2×1 rectangle on nested
/// meshes with `levels[i]` cells per unit length.
pub fn poincare_wirtinger_study(levels: &[usize]) -> Result<Report> {
    let n0 = *levels.first().ok_or_else(|| Error::invalid("need at least one level"))?;
    let squares = nested(build_unit_square(n0)?, levels)?;
    let rects = nested(build_rectangle(2.0, 1.0, 2 * n0, n0)?, levels)?;
    let mut report = Report::new(
        "poincare_wirtinger",
        &["square", "square_rel_error", "rectangle", "rectangle_rel_error"],
    )
    .param("levels", levels);
    let (sq_exact, rect_exact) = (1.0 / PI, 2.0 / PI);
    for (level, (s, r)) in squares.iter().zip(&rects).enumerate() {
        let cs = poincare_constant_2(s, &PoincareMode::Wirtinger)?;
        let cr = poincare_constant_2(r, &PoincareMode::Wirtinger)?;
        report.push_row(
            level,
            s.h(),
            vec![cs, (cs - sq_exact).abs() / sq_exact, cr, (cr - rect_exact).abs() / rect_exact],
        );
    }
    let sq = report.column("square").expect("column");
    let rect = report.column("rectangle").expect("column");
    let last = |v: &[f64]| *v.last().expect("nonempty");
    report.fitted_value = Some(last(&sq));
    report.tolerance = 0.05;
    report.checks = vec![
        Check::relative("square", last(&sq), sq_exact, 0.05),
        Check::relative("rectangle", last(&rect), rect_exact, 0.05),
        Check::flag("square_monotone", nondecreasing(&sq)),
        Check::flag("rectangle_monotone", nondecreasing(&rect)),
    ];
    Ok(report)
}

/// Ascent lower bounds for the `L^p` Wirtinger constant of the unit square
/// on nested meshes; at `p = 2` they are compared with the eigenvalue
/// estimate.
pub fn poincare_lower_bound_study(p: f64, levels: &[usize], seeds: &[u64]) -> Result<Report> {
    let n0 = *levels.first().ok_or_else(|| Error::invalid("need at least one level"))?;
    let meshes = nested(build_unit_square(n0)?, levels)?;
    let bounds = poincare_lower_bound_nested(&meshes, p, seeds)?;
    let columns: &[&str] = if p == 2.0 {
        &["lower_bound", "eigen_estimate"]
    } else {
        &["lower_bound"]
    };
    let mut report = Report::new("poincare_lower_bound", columns)
        .param("p", p)
        .param("levels", levels)
        .param("seeds", seeds);
    let mut eigen = Vec::new();
    for (level, (m, &b)) in meshes.iter().zip(&bounds).enumerate() {
        let mut row = vec![b];
        if p == 2.0 {
            let c = poincare_constant_2(m, &PoincareMode::Wirtinger)?;
            eigen.push(c);
            row.push(c);
        }
        report.push_row(level, m.h(), row);
    }
    let best = *bounds.last().expect("nonempty");
    report.fitted_value = Some(best);
    report.checks.push(Check::flag("monotone", nondecreasing(&bounds)));
    if let Some(&c) = eigen.last() {
        report.tolerance = 0.05;
        report.checks.push(Check::relative("matches_eigen", best, c, 0.05));
        // a quotient of an explicit field cannot beat the discrete optimum
        report.checks.push(Check::at_most("below_eigen", best, c * (1.0 + 1e-9)));
    }
    Ok(report)
}

/// Names of the rows of [`holder_study`], in order.
pub const HOLDER_CASES: [&str; 4] = ["x_square", "sqrt_r_disk", "cusp_p2", "cusp_p8"];

/// Hölder exponent estimates: `u = x` on the unit square, `u = √r` on a
/// disk, and the p-energy minimizers on the `k = 3` cusp with `u = y` held
/// on the `x = 1` side for `p ∈ {2, 8}`.
pub fn holder_study(n_pairs: usize, seed: u64) -> Result<Report> {
    let mut report = Report::new("holder", &["alpha", "fit_quality", "pairs"])
        .param("cases", HOLDER_CASES)
        .param("n_pairs", n_pairs)
        .param("seed", seed);

    let square = build_unit_square(16)?;
    let disk = build_disk(1.0, 16, 64)?;
    let cusp = build_cusp(3.0, 4)?;
    let right = Region::Tag("right".into()).vertices(&cusp, &BoundaryPartition::all_dirichlet(&cusp))?;
    let datum = ScalarField::from_fn(&cusp, |q| q[1]);
    let mut cases: Vec<(&Mesh, ScalarField)> = vec![
        (&square, ScalarField::from_fn(&square, |q| q[0])),
        (&disk, ScalarField::from_fn(&disk, |q| (q[0] * q[0] + q[1] * q[1]).sqrt().sqrt())),
    ];
    for p in [2.0, 8.0] {
        let (u, _) = solve_p_laplace(&PlapProblem::new(&cusp, right.iter().copied(), datum.clone(), p)?)?;
        cases.push((&cusp, u));
    }

    let mut alphas = Vec::new();
    for (level, (mesh, u)) in cases.iter().enumerate() {
        let fit = holder_exponent(mesh, u, n_pairs, seed)?;
        alphas.push(fit.alpha);
        report.push_row(
            level,
            mesh.h(),
            vec![fit.alpha.unwrap_or(f64::NAN), fit.fit_quality, fit.pairs as f64],
        );
    }
    let a = |i: usize| alphas[i].unwrap_or(f64::NAN);
    report.fitted_value = alphas[0];
    report.tolerance = 0.1;
    report.checks = vec![
        Check::absolute("x_square", a(0), 1.0, 0.1),
        Check::absolute("sqrt_r_disk", a(1), 0.5, 0.1),
        Check::flag("cusp_p2_positive", a(2) > 0.0),
        Check::flag("cusp_p8_positive", a(3) > 0.0),
    ];
    Ok(report)
}
