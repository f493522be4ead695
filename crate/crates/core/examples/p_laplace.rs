//! Trace-constrained p-energy minimization on the unit square, with the
//! boundary held at `sin(πx) y` and a random-direction certificate.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use varfem::prelude::*;

fn main() -> Result<()> {
    let mesh = build_unit_square(12)?;
    let boundary: BTreeSet<usize> = mesh.boundary_vertices().into_iter().collect();
    let datum = ScalarField::from_fn(&mesh, |q| (PI * q[0]).sin() * q[1]);

    println!("{:>5} {:>12} {:>12} {:>6} {:>10}", "p", "energy", "stationarity", "iters", "certified");
    for p in [1.5, 2.0, 3.0, 6.0] {
        let problem = PlapProblem::new(&mesh, boundary.iter().copied(), datum.clone(), p)?;
        let (u, report) = solve_p_laplace(&problem)?;
        let cert = minimality_certificate(&mesh, &u, p, &boundary, 100, 5)?;
        let passed = cert.certificate.map_or(false, |c| c.passed);
        println!(
            "{p:>5} {:>12.8} {:>12.2e} {:>6} {:>10}",
            report.energy, report.stationarity, report.iterations, passed
        );
    }
    Ok(())
}
