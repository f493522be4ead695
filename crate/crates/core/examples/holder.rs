//! Hölder exponent estimates from the envelope of `|u(x) − u(y)|` against
//! the inner distance.

use varfem::geometry::build_cusp;
use varfem::prelude::*;
use varfem::verify::holder_exponent;

fn show(name: &str, mesh: &Mesh, u: &ScalarField) -> Result<()> {
    let fit = holder_exponent(mesh, u, 200_000, 3)?;
    match fit.alpha {
        Some(a) => println!("{name:<12} alpha {a:.4}  fit {:.4}  pairs {}", fit.fit_quality, fit.pairs),
        None => println!("{name:<12} no exponent"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let square = build_unit_square(16)?;
    show("x", &square, &ScalarField::from_fn(&square, |q| q[0]))?;
    show("x^2", &square, &ScalarField::from_fn(&square, |q| q[0] * q[0]))?;
    show("constant", &square, &ScalarField::constant(&square, 2.0))?;

    let disk = build_disk(1.0, 16, 64)?;
    show("sqrt r", &disk, &ScalarField::from_fn(&disk, |q| (q[0].hypot(q[1])).sqrt()))?;

    let cusp = build_cusp(3.0, 4)?;
    let right = Region::Tag("right".into()).vertices(&cusp, &BoundaryPartition::all_dirichlet(&cusp))?;
    for p in [2.0, 8.0] {
        let problem = PlapProblem::new(&cusp, right.iter().copied(), ScalarField::from_fn(&cusp, |q| q[1]), p)?;
        let (u, _) = solve_p_laplace(&problem)?;
        show(&format!("cusp p={p}"), &cusp, &u)?;
    }
    Ok(())
}
