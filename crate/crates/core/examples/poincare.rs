//! Poincaré constants: eigenvalue estimates at `p = 2` and ascent lower
//! bounds for other exponents.

use std::f64::consts::PI;

use varfem::verify::{poincare_constant_2, poincare_lower_bound_p, PoincareMode};
use varfem::prelude::*;

fn main() -> Result<()> {
    for n in [8, 16, 32] {
        let sq = poincare_constant_2(&build_unit_square(n)?, &PoincareMode::Wirtinger)?;
        let rect = poincare_constant_2(&build_rectangle(2.0, 1.0, 2 * n, n)?, &PoincareMode::Wirtinger)?;
        println!("n = {n:>2}  square {sq:.6} (1/π = {:.6})  rectangle {rect:.6} (2/π = {:.6})", 1.0 / PI, 2.0 / PI);
    }

    let mesh = build_unit_square(12)?;
    let left = Region::Tag("left".into()).vertices(&mesh, &BoundaryPartition::all_dirichlet(&mesh))?;
    println!("vanishing on the left side: {:.6}", poincare_constant_2(&mesh, &PoincareMode::Trace(left))?);

    for p in [1.5, 2.0, 4.0] {
        let bound = poincare_lower_bound_p(&mesh, p, &[1, 2, 3])?;
        println!("p = {p}: lower bound {:.6} (starts {:?})", bound.value, bound.initial);
    }
    Ok(())
}
