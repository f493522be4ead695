//! Flux of the field `β = (x, y)/r²` against a radial plateau on annuli
//! with shrinking inner radius.
//!
//! `β` is divergence free away from the origin, yet `<β, ∂u>` tends to
//! `−2π` for a plateau `u` equal to 1 near the hole and 0 near the outer
//! circle: the boundary term lost at the puncture.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Check, Report};
use crate::error::{Error, Result};
use crate::fem::{gradient, lp_norm, scalar_inner, vector_inner, ScalarField, VectorField};
use crate::geometry::build_annulus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PuncturedSetup {
    pub p: f64,
    pub r_out: f64,
    pub r_in: Vec<f64>,
    /// Angular resolutions, one mesh level each.
    pub n_angular: Vec<usize>,
}

impl Default for PuncturedSetup {
    fn default() -> Self {
        Self {
            p: 3.0,
            r_out: 1.0,
            r_in: vec![1e-2, 1e-3],
            n_angular: vec![32, 64, 128],
        }
    }
}

const COLUMNS: [&str; 8] = [
    "r_in",
    "n_angular",
    "flux",
    "flux_rel_error",
    "beta_lpprime",
    "beta_lpprime_exact",
    "beta_l2_sq",
    "beta_l2_sq_exact",
];

/// `||β||_{L^q}^q` on the annulus, closed form.
fn beta_norm_pow(q: f64, r_in: f64, r_out: f64) -> f64 {
    if q == 2.0 {
        2.0 * PI * (r_out / r_in).ln()
    } else {
        2.0 * PI * (r_out.powf(2.0 - q) - r_in.powf(2.0 - q)) / (2.0 - q)
    }
}

/// Runs the experiment; rows are ordered by inner radius, then level.
pub fn counterexample_punctured(setup: &PuncturedSetup) -> Result<Report> {
    let p = setup.p;
    if !(p > 2.0) {
        return Err(Error::invalid(format!(
            "the punctured-disk experiment needs p > 2 (p_M(A) = 2 for a point puncture), got {p}"
        )));
    }
    if setup.r_in.is_empty() || setup.n_angular.is_empty() {
        return Err(Error::invalid("need at least one inner radius and one level"));
    }
    if setup.r_in.iter().any(|&r| !(r > 0.0 && r < setup.r_out)) {
        return Err(Error::invalid("inner radii must lie in (0, r_out)"));
    }
    let q = p / (p - 1.0);
    // one plateau for the whole schedule so the fluxes are comparable
    let r_max = setup.r_in.iter().copied().fold(0.0, f64::max);
    let (r1, r2) = (2.0 * r_max, 0.8 * setup.r_out);
    if !(r1 < r2) {
        return Err(Error::invalid("inner radii too large for the plateau"));
    }
    let plateau = |r: f64| ((r2 - r) / (r2 - r1)).clamp(0.0, 1.0);

    let mut report = Report::new("counterexample_punctured", &COLUMNS)
        .param("p", p)
        .param("p_conjugate", q)
        .param("r_out", setup.r_out)
        .param("r_in", &setup.r_in)
        .param("n_angular", &setup.n_angular)
        .param("plateau", [r1, r2]);
    report.tolerance = 0.05;

    let mut finest = Vec::new();
    for &r_in in &setup.r_in {
        let mut last = None;
        for (level, &n_ang) in setup.n_angular.iter().enumerate() {
            let n_rad = ((n_ang as f64 * (setup.r_out / r_in).ln() / (2.0 * PI)).round() as usize).max(1);
            let mesh = build_annulus(r_in, setup.r_out, n_rad, n_ang)?;
            let beta = VectorField::from_fn(&mesh, |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                [x[0] / r2, x[1] / r2]
            });
            let u = ScalarField::from_fn(&mesh, |x| plateau(x[0].hypot(x[1])));
            // analytic divergence of β is zero
            let div = ScalarField::zeros(&mesh);
            let flux = vector_inner(&mesh, &beta, &gradient(&mesh, &u)?)? + scalar_inner(&mesh, &div, &u)?;
            let lq = lp_norm(&mesh, &beta, q)?;
            let l2 = lp_norm(&mesh, &beta, 2.0)?;
            report.push_row(
                level,
                mesh.h(),
                vec![
                    r_in,
                    n_ang as f64,
                    flux,
                    (flux.abs() - 2.0 * PI).abs() / (2.0 * PI),
                    lq,
                    beta_norm_pow(q, r_in, setup.r_out).powf(1.0 / q),
                    l2 * l2,
                    beta_norm_pow(2.0, r_in, setup.r_out),
                ],
            );
            last = Some((flux, lq, l2 * l2));
        }
        let (flux, lq, l2sq) = last.expect("nonempty levels");
        report
            .checks
            .push(Check::relative(format!("abs_flux_r_in_{r_in:e}"), flux.abs(), 2.0 * PI, 0.05));
        report.checks.push(Check::relative(
            format!("l2_sq_r_in_{r_in:e}"),
            l2sq,
            beta_norm_pow(2.0, r_in, setup.r_out),
            0.03,
        ));
        finest.push((flux, lq));
    }

    // limit of ||β||_{L^q} as the hole closes (finite because q < 2)
    let bound = (2.0 * PI * setup.r_out.powf(2.0 - q) / (2.0 - q)).powf(1.0 / q);
    let worst_lq = finest.iter().map(|f| f.1).fold(0.0, f64::max);
    report.checks.push(Check::at_most("beta_lpprime_bounded", worst_lq, bound));
    let fluxes: Vec<f64> = finest.iter().map(|f| f.0.abs()).collect();
    let (lo, hi) = fluxes
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    report.checks.push(Check::at_most("flux_spread_across_r_in", (hi - lo) / hi, 0.02));
    report.fitted_value = fluxes.last().copied();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_norms() {
        assert!((beta_norm_pow(1.5, 0.0, 1.0) - 4.0 * PI).abs() < 1e-12);
        assert!((beta_norm_pow(2.0, 1e-2, 1.0) - 2.0 * PI * 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_p() {
        let err = counterexample_punctured(&PuncturedSetup {
            p: 2.0,
            ..PuncturedSetup::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("p_M(A) = 2"));
    }

    #[test]
    fn coarse_run_has_the_right_sign_and_size() {
        let rep = counterexample_punctured(&PuncturedSetup {
            n_angular: vec![16, 32],
            ..PuncturedSetup::default()
        })
        .unwrap();
        assert_eq!(rep.rows.len(), 4);
        let flux = rep.column("flux").unwrap();
        assert!(flux.iter().all(|&f| f < 0.0 && (f + 2.0 * PI).abs() < 0.5));
    }
}
