//! Structured triangulations of the model domains.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, Point};
use crate::error::{Error, Result};

/// Abscissa below which the cusp is closed by a fan of triangles to the tip.
const CUSP_TIP_CUTOFF: f64 = 1e-2;

/// Default ratio between consecutive geometric columns of a cusp mesh.
pub const CUSP_GRADING: f64 = 0.7;

/// Declarative description of a model domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitSquare {
        n: usize,
    },
    Rectangle {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
        n_radial: usize,
        n_angular: usize,
    },
    Disk {
        radius: f64,
        n_radial: usize,
        n_angular: usize,
    },
    Cusp {
        k: f64,
        n: usize,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            DomainSpec::UnitSquare { n } => build_unit_square(n),
            DomainSpec::Rectangle { width, height, nx, ny } => build_rectangle(width, height, nx, ny),
            DomainSpec::Annulus {
                r_in,
                r_out,
                n_radial,
                n_angular,
            } => build_annulus(r_in, r_out, n_radial, n_angular),
            DomainSpec::Disk {
                radius,
                n_radial,
                n_angular,
            } => build_disk(radius, n_radial, n_angular),
            DomainSpec::Cusp { k, n } => build_cusp(k, n),
        }
    }
}

fn assemble(
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    singular: Vec<usize>,
    tagger: impl Fn(Point, Point) -> &'static str,
) -> Result<Mesh> {
    // boundary = undirected edges used by exactly one triangle, in
    // triangle order so the listing is deterministic
    let mut uses: HashMap<(usize, usize), u32> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut boundary = Vec::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if uses[&(a.min(b), a.max(b))] == 1 {
                boundary.push((a, b, tagger(vertices[a], vertices[b]).to_string()));
            }
        }
    }
    Mesh::from_parts(vertices, triangles, boundary, singular)
}

/// Structured triangulation of `[0,1]^2` with `n` cells per side.
pub fn build_unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("unit square needs n >= 1"));
    }
    build_rectangle(1.0, 1.0, n, n)
}

/// Structured triangulation of `[0,width] x [0,height]`; each cell is cut
/// along its rising diagonal, so every triangle is right-angled.
pub fn build_rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("rectangle needs nx, ny >= 1"));
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::invalid("rectangle needs positive width and height"));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let tol = 1e-12 * width.max(height);
    assemble(vertices, triangles, vec![], move |p, q| {
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        if mid[1].abs() <= tol {
            "bottom"
        } else if (mid[0] - width).abs() <= tol {
            "right"
        } else if (mid[1] - height).abs() <= tol {
            "top"
        } else {
            "left"
        }
    })
}

/// Polar triangulation of the annulus `r_in < r < r_out`.
///
/// Ring radii are geometrically spaced, `r_k = r_in (r_out/r_in)^(k/n_radial)`,
/// so small inner radii are resolved with elements of bounded aspect ratio.
/// Boundary loops are tagged `"inner"` and `"outer"`.
pub fn build_annulus(r_in: f64, r_out: f64, n_radial: usize, n_angular: usize) -> Result<Mesh> {
    if !(r_in > 0.0) {
        return Err(Error::invalid(
            "annulus needs r_in > 0: a point puncture cannot be triangulated, shrink r_in instead",
        ));
    }
    if !(r_out > r_in) {
        return Err(Error::invalid("annulus needs r_out > r_in"));
    }
    if n_radial == 0 || n_angular < 3 {
        return Err(Error::invalid("annulus needs n_radial >= 1 and n_angular >= 3"));
    }
    let ratio = r_out / r_in;
    let radius = |k: usize| {
        if k == n_radial {
            r_out
        } else {
            r_in * ratio.powf(k as f64 / n_radial as f64)
        }
    };
    let idx = |k: usize, j: usize| k * n_angular + j % n_angular;
    let mut vertices = Vec::with_capacity((n_radial + 1) * n_angular);
    for k in 0..=n_radial {
        let r = radius(k);
        for j in 0..n_angular {
            let th = 2.0 * PI * j as f64 / n_angular as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n_radial * n_angular);
    for k in 0..n_radial {
        for j in 0..n_angular {
            let (a, b, c, d) = (idx(k, j), idx(k + 1, j), idx(k + 1, j + 1), idx(k, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let split = 0.5 * (r_in + r_out);
    assemble(vertices, triangles, vec![], move |p, _| {
        if p[0].hypot(p[1]) < split {
            "inner"
        } else {
            "outer"
        }
    })
}

/// Polar triangulation of the disk of given radius, with a vertex at the
/// center (index 0) and uniformly spaced rings.
pub fn build_disk(radius: f64, n_radial: usize, n_angular: usize) -> Result<Mesh> {
    if !(radius > 0.0) {
        return Err(Error::invalid("disk needs a positive radius"));
    }
    if n_radial == 0 || n_angular < 3 {
        return Err(Error::invalid("disk needs n_radial >= 1 and n_angular >= 3"));
    }
    let idx = |k: usize, j: usize| 1 + (k - 1) * n_angular + j % n_angular;
    let mut vertices = vec![[0.0, 0.0]];
    for k in 1..=n_radial {
        let r = radius * k as f64 / n_radial as f64;
        for j in 0..n_angular {
            let th = 2.0 * PI * j as f64 / n_angular as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n_angular {
        triangles.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for k in 1..n_radial {
        for j in 0..n_angular {
            let (a, b, c, d) = (idx(k, j), idx(k + 1, j), idx(k + 1, j + 1), idx(k, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    assemble(vertices, triangles, vec![], |_, _| "outer")
}

/// Graded triangulation of the planar cusp `{0 < x < 1, |y| < x^k / 2}`.
///
/// Column abscissas follow the geometric sequence `0.7^g`, each geometric
/// interval split uniformly into `n` sub-columns, down to `x = 1e-2`; the last
/// column is joined to the tip by a fan. Every column carries `n + 1`
/// vertices. The tip is vertex 0 and is declared singular. Boundary tags are
/// `"upper"`, `"lower"` and `"right"` (the segment `x = 1`).
pub fn build_cusp(k: f64, n: usize) -> Result<Mesh> {
    build_cusp_graded(k, n, CUSP_GRADING)
}

pub fn build_cusp_graded(k: f64, n: usize, grading: f64) -> Result<Mesh> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::invalid("cusp exponent must satisfy k >= 1"));
    }
    if n < 2 {
        return Err(Error::invalid("cusp needs n >= 2"));
    }
    if !(grading > 0.0 && grading < 1.0) {
        return Err(Error::invalid("cusp grading ratio must lie in (0, 1)"));
    }
    let levels = (CUSP_TIP_CUTOFF.ln() / grading.ln()).ceil() as i32;
    // abscissas from the tip side outward
    let mut xs = Vec::new();
    for g in (0..levels).rev() {
        let (lo, hi) = (grading.powi(g + 1), grading.powi(g));
        for s in 0..n {
            xs.push(lo + (hi - lo) * s as f64 / n as f64);
        }
    }
    xs.push(1.0);

    let mut vertices = vec![[0.0, 0.0]];
    for &x in &xs {
        let half = 0.5 * x.powf(k);
        for i in 0..=n {
            vertices.push([x, -half + 2.0 * half * i as f64 / n as f64]);
        }
    }
    let idx = |c: usize, i: usize| 1 + c * (n + 1) + i;
    let mut triangles = Vec::new();
    for i in 0..n {
        triangles.push([0, idx(0, i), idx(0, i + 1)]);
    }
    for c in 0..xs.len() - 1 {
        for i in 0..n {
            let (a, b, cc, d) = (idx(c, i), idx(c + 1, i), idx(c + 1, i + 1), idx(c, i + 1));
            triangles.push([a, b, cc]);
            triangles.push([a, cc, d]);
        }
    }
    assemble(vertices, triangles, vec![0], |p, q| {
        if p[0] == 1.0 && q[0] == 1.0 {
            "right"
        } else if p[1] + q[1] > 0.0 {
            "upper"
        } else {
            "lower"
        }
    })
}

/// Uniform red refinement: every triangle is split into four similar
/// children through its edge midpoints.
///
/// Coarse vertices keep their indices; boundary edge `e` becomes the pair of
/// fine edges `2e`, `2e + 1` with the same tag.
pub fn refine(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in mesh.triangles() {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let m = mid(e.a, e.b, &mut vertices);
        boundary.push((e.a, m, e.tag.clone()));
        boundary.push((m, e.b, e.tag.clone()));
    }
    Mesh::from_parts(vertices, triangles, boundary, mesh.singular_vertices().to_vec())
        .expect("red refinement of a valid mesh is valid")
}

/// Parent edge of every vertex [`refine`] appends, in index order: fine
/// vertex `coarse.n_vertices() + i` is the midpoint of the `i`-th pair.
pub fn refinement_parents(coarse: &Mesh) -> Vec<(usize, usize)> {
    let mut seen = std::collections::HashSet::new();
    let mut parents = Vec::new();
    for &[a, b, c] in coarse.triangles() {
        for (p, q) in [(a, b), (b, c), (c, a)] {
            if seen.insert((p.min(q), p.max(q))) {
                parents.push((p, q));
            }
        }
    }
    parents
}

/// Applies [`refine`] `levels` times.
pub fn refine_times(mesh: &Mesh, levels: usize) -> Mesh {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = refine(&m);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every interior edge must be shared by two triangles with opposite
    /// orientation; boundary edges by exactly one.
    fn check_edge_sharing(m: &Mesh) {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in m.triangles() {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        assert!(directed.values().all(|&c| c == 1));
        let nb = directed.keys().filter(|&&(a, b)| !directed.contains_key(&(b, a))).count();
        assert_eq!(nb, m.boundary_edges().len());
    }

    #[test]
    fn unit_square_counts() {
        let m = build_unit_square(1).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.boundary_edges().len()), (4, 2, 4));
        let m = build_unit_square(2).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.boundary_edges().len()), (9, 8, 8));
        for n in [1, 3, 7, 16] {
            let m = build_unit_square(n).unwrap();
            assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.n_triangles(), 2 * n * n);
            assert_eq!(m.boundary_edges().len(), 4 * n);
            assert!((m.total_area() - 1.0).abs() < 1e-14);
            check_edge_sharing(&m);
        }
        assert!(build_unit_square(0).is_err());
    }

    #[test]
    fn unit_square_tags() {
        let m = build_unit_square(3).unwrap();
        assert_eq!(m.boundary_tags(), vec!["bottom", "left", "right", "top"]);
        for e in m.boundary_edges() {
            let expected = match e.tag.as_str() {
                "left" => [-1.0, 0.0],
                "right" => [1.0, 0.0],
                "bottom" => [0.0, -1.0],
                _ => [0.0, 1.0],
            };
            assert_eq!(e.normal, expected);
            assert!((e.normal[0].hypot(e.normal[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn annulus_area_from_below() {
        let exact = PI * (1.0 - 0.25f64.powi(2));
        let mut last = 0.0;
        for n_ang in [8, 16, 32, 64, 128] {
            let m = build_annulus(0.25, 1.0, 4, n_ang).unwrap();
            let a = m.total_area();
            assert!(a < exact && a > last);
            assert!((a - m.boundary_enclosed_area()).abs() < 1e-12);
            last = a;
            let inner = m.boundary_edges().iter().filter(|e| e.tag == "inner").count();
            let outer = m.boundary_edges().iter().filter(|e| e.tag == "outer").count();
            assert_eq!((inner, outer), (n_ang, n_ang));
            check_edge_sharing(&m);
        }
        assert!((last - exact).abs() / exact < 1e-3);
        assert!(build_annulus(0.0, 1.0, 4, 8).is_err());
        assert!(build_annulus(1.0, 0.5, 4, 8).is_err());
    }

    #[test]
    fn annulus_inner_normals_point_to_center() {
        let m = build_annulus(0.1, 1.0, 3, 12).unwrap();
        for e in m.boundary_edges() {
            let mid = e.midpoint(&m);
            let radial = (mid[0] * e.normal[0] + mid[1] * e.normal[1]) / mid[0].hypot(mid[1]);
            if e.tag == "inner" {
                assert!(radial < -0.99);
            } else {
                assert!(radial > 0.99);
            }
        }
    }

    #[test]
    fn cusp_area_matches_integral() {
        for k in [1.0, 2.0, 3.0] {
            let m = refine(&build_cusp(k, 4).unwrap());
            let exact = 1.0 / (k + 1.0);
            assert!(
                (m.total_area() - exact).abs() / exact < 0.01,
                "k={k}: {} vs {exact}",
                m.total_area()
            );
            assert_eq!(m.singular_vertices(), &[0]);
            assert_eq!(m.vertices()[0], [0.0, 0.0]);
            check_edge_sharing(&m);
        }
        assert!(build_cusp(0.5, 4).is_err());
        assert!(build_cusp(2.0, 1).is_err());
    }

    #[test]
    fn disk_has_center_vertex() {
        let m = build_disk(1.0, 6, 24).unwrap();
        assert_eq!(m.vertices()[0], [0.0, 0.0]);
        assert_eq!(m.boundary_edges().len(), 24);
        check_edge_sharing(&m);
    }

    #[test]
    fn refine_counts_and_nesting() {
        let m = build_cusp(2.0, 3).unwrap();
        let f = refine(&m);
        assert_eq!(f.n_triangles(), 4 * m.n_triangles());
        assert_eq!(f.boundary_edges().len(), 2 * m.boundary_edges().len());
        assert!((f.total_area() - m.total_area()).abs() < 1e-15);
        assert_eq!(&f.vertices()[..m.n_vertices()], m.vertices());
        for (e, coarse) in m.boundary_edges().iter().enumerate() {
            assert_eq!(f.boundary_edges()[2 * e].tag, coarse.tag);
            assert_eq!(f.boundary_edges()[2 * e + 1].tag, coarse.tag);
            assert_eq!(f.boundary_edges()[2 * e].a, coarse.a);
            assert_eq!(f.boundary_edges()[2 * e + 1].b, coarse.b);
        }
        assert_eq!(f.singular_vertices(), m.singular_vertices());
        let parents = refinement_parents(&m);
        assert_eq!(m.n_vertices() + parents.len(), f.n_vertices());
        for (i, &(a, b)) in parents.iter().enumerate() {
            let (p, q) = (m.vertices()[a], m.vertices()[b]);
            assert_eq!(f.vertices()[m.n_vertices() + i], [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        }
        check_edge_sharing(&f);
    }

    #[test]
    fn domain_spec_builds_every_kind() {
        let specs = [
            r#"{"kind":"unit_square","n":2}"#,
            r#"{"kind":"rectangle","width":2,"height":1,"nx":4,"ny":2}"#,
            r#"{"kind":"annulus","r_in":0.1,"r_out":1,"n_radial":3,"n_angular":8}"#,
            r#"{"kind":"disk","radius":1,"n_radial":2,"n_angular":6}"#,
            r#"{"kind":"cusp","k":2,"n":2}"#,
        ];
        for s in specs {
            let spec: DomainSpec = serde_json::from_str(s).unwrap();
            spec.build().unwrap();
        }
    }
}
