//! Pure Neumann problems: an incompatible load is rejected with its
//! defect, a compatible one is solved in the zero-mean gauge.

use varfem::laplace::zero_flux;
use varfem::prelude::*;

fn main() -> Result<()> {
    let mesh = build_unit_square(16)?;

    let ones = ScalarField::constant(&mesh, 1.0);
    println!("defect for g = 1, θ = 0: {:.12}", compatibility_defect(&mesh, &ones, &zero_flux(&mesh))?);
    match solve_neumann(&NeumannProblem::new(&mesh, ones, zero_flux(&mesh))?) {
        Err(Error::Incompatible { defect, tolerance }) => {
            println!("rejected: defect {defect:.3e} > tolerance {tolerance:.1e}")
        }
        other => println!("unexpected: {other:?}"),
    }

    // Δu = 0 with the flux of x² − y²
    let part = BoundaryPartition::all_neumann(&mesh);
    let theta = BoundaryTrace::edge_data(&mesh, &part, Region::Whole, |x, n| 2.0 * x[0] * n[0] - 2.0 * x[1] * n[1])?;
    let u = solve_neumann(&NeumannProblem::new(&mesh, ScalarField::zeros(&mesh), theta)?)?;
    let mean = scalar_inner(&mesh, &u, &ScalarField::constant(&mesh, 1.0))?;
    let err = varfem::fem::l2_error(&mesh, &u, |p| p[0] * p[0] - p[1] * p[1])?;
    println!("harmonic data: mean {mean:.2e}, L2 error {err:.4e}");
    Ok(())
}
