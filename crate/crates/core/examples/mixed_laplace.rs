//! Mixed Dirichlet/Neumann problem on the unit square: `u = x² − y²`
//! held on the left and bottom sides, its normal derivative given on the
//! others.

use varfem::fem::l2_error;
use varfem::prelude::*;

fn main() -> Result<()> {
    let exact = |p: [f64; 2]| p[0] * p[0] - p[1] * p[1];
    for n in [8, 16, 32] {
        let mesh = build_unit_square(n)?;
        let part = tag_boundary(
            &mesh,
            &[
                (EdgeSelector::tag("left"), Condition::Dirichlet),
                (EdgeSelector::tag("bottom"), Condition::Dirichlet),
                (EdgeSelector::tag("right"), Condition::Neumann),
                (EdgeSelector::tag("top"), Condition::Neumann),
            ],
        )?;
        let flux = BoundaryTrace::edge_data(&mesh, &part, Region::Neumann, |x, nu| {
            2.0 * x[0] * nu[0] - 2.0 * x[1] * nu[1]
        })?;
        let problem = MixedProblem::new(
            &mesh,
            &part,
            ScalarField::zeros(&mesh),
            ScalarField::from_fn(&mesh, exact),
            Some(flux.clone()),
        )?;
        let u = solve_mixed(&problem)?;
        let res = weak_residual(&mesh, &part, &u, &ScalarField::zeros(&mesh), Some(&flux))?;
        println!("n = {n:>3}  L2 error {:.4e}  weak residual {res:.2e}", l2_error(&mesh, &u, exact)?);
    }
    Ok(())
}
