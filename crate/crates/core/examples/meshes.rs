//! Builds each model domain, refines it, partitions its boundary and
//! prints a few mesh statistics, including inner-metric distances.

use varfem::geometry::{build_cusp, refine_times, CUSP_GRADING};
use varfem::prelude::*;

fn main() -> Result<()> {
    let domains = [
        ("unit square", build_unit_square(8)?),
        ("2x1 rectangle", build_rectangle(2.0, 1.0, 16, 8)?),
        ("disk", build_disk(1.0, 8, 32)?),
        ("annulus", build_annulus(0.01, 1.0, 12, 32)?),
        ("cusp k=3", build_cusp(3.0, 4)?),
    ];
    println!("{:<14} {:>6} {:>6} {:>8} {:>10}", "domain", "verts", "tris", "h", "area");
    for (name, m) in &domains {
        println!(
            "{name:<14} {:>6} {:>6} {:>8.4} {:>10.6}",
            m.n_vertices(),
            m.n_triangles(),
            m.h(),
            m.total_area()
        );
    }

    let square = refine_times(&domains[0].1, 1);
    println!("refined square: {} vertices, tags {:?}", square.n_vertices(), square.boundary_tags());

    let part = tag_boundary(
        &square,
        &[
            (EdgeSelector::tag("left"), Condition::Dirichlet),
            (EdgeSelector::midpoint(|m| m[0] > 0.0), Condition::Neumann),
        ],
    )?;
    let n_dir = part.conditions().iter().filter(|&&c| c == Condition::Dirichlet).count();
    println!("left side Dirichlet: {n_dir} of {} boundary edges", part.conditions().len());

    // opposite corners: the edge-path distance is at least the Euclidean one
    let corner = |m: &Mesh, x: f64, y: f64| {
        m.vertices().iter().position(|v| v[0] == x && v[1] == y).expect("corner vertex")
    };
    let (a, b) = (corner(&square, 0.0, 0.0), corner(&square, 1.0, 1.0));
    println!("d_M(corner, corner) = {:.6} (euclidean {:.6})", inner_metric(&square, a, b)?, 2f64.sqrt());

    let cusp = &domains[4].1;
    println!(
        "cusp: {} singular vertices, column grading {CUSP_GRADING}",
        cusp.singular_vertices().len()
    );
    println!("p_M(A) with a point frontier: {}", p_threshold(&part, DeclaredDim::Dim(0), DeclaredDim::Empty)?);

    let json = square.to_json();
    let back = Mesh::from_json(&json)?;
    assert_eq!(back.hash(), square.hash());
    println!("JSON round trip: {} bytes, hash {:016x}", json.len(), back.hash());
    Ok(())
}
