//! Checks `<β, ∂u> + <∇β, u> = <γ_ν β, tr u>` on random fields using the
//! weak divergence, then with the analytic divergence under refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varfem::prelude::*;

fn main() -> Result<()> {
    let mesh = build_unit_square(12)?;
    let part = BoundaryPartition::all_dirichlet(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u = ScalarField::new(&mesh, (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let beta = VectorField::new(
            &mesh,
            (0..mesh.n_triangles()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect(),
        )?;
        let div = weak_divergence(&mesh, &part, &beta)?;
        let terms = ibp_residual(&mesh, &part, &u, &beta, &div, Region::Whole)?;
        worst = worst.max(terms.relative());
    }
    println!("weak divergence, 10 random pairs: worst relative residual {worst:.3e}");

    println!("{:>4} {:>14}", "n", "residual");
    for n in [8, 16, 32, 64] {
        let m = build_unit_square(n)?;
        let part = BoundaryPartition::all_dirichlet(&m);
        let u = ScalarField::from_fn(&m, |p| p[0]);
        let beta = VectorField::from_fn(&m, |p| [p[0], 0.0]);
        let terms = ibp_residual(&m, &part, &u, &beta, &ScalarField::constant(&m, 1.0), Region::Whole)?;
        println!("{n:>4} {:>14.6e}", terms.residual().abs());
    }
    Ok(())
}
