use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A boundary edge oriented so that the domain lies on its left.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    /// Geometric region name assigned by the generator (`"left"`, `"inner"`, ...).
    pub tag: String,
    /// The unique triangle containing this edge.
    pub owner: usize,
    /// Outward unit normal.
    pub normal: Point,
    pub length: f64,
}

impl BoundaryEdge {
    pub fn midpoint(&self, mesh: &Mesh) -> Point {
        let (p, q) = (mesh.vertices[self.a], mesh.vertices[self.b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }
}

/// Triangulated planar domain with cached element geometry.
///
/// Triangles are stored counterclockwise. Vertex indices of an existing mesh
/// are preserved by [`refine`](crate::geometry::refine), which appends
/// midpoints after the coarse vertices.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    singular: Vec<usize>,
    areas: Vec<f64>,
    /// Gradients of the three barycentric coordinates on each triangle.
    basis_grads: Vec<[Point; 3]>,
    hash: u64,
}

pub(crate) fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl Mesh {
    /// Assembles a mesh from raw parts, deriving owners, normals and lengths
    /// for the listed boundary edges and checking every structural invariant.
    ///
    /// Boundary edges may be listed in either orientation; they are stored in
    /// the orientation induced by their owning triangle.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<(usize, usize, String)>,
        mut singular: Vec<usize>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::MeshFormat("mesh has no triangles".into()));
        }
        if let Some(p) = vertices.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::MeshFormat(format!("non-finite vertex {p:?}")));
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut basis_grads = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::MeshFormat(format!("triangle {t} references a missing vertex")));
            }
            let [p, q, r] = tri.map(|v| vertices[v]);
            let area = signed_area(p, q, r);
            if !(area > 0.0) {
                return Err(Error::MeshFormat(format!(
                    "triangle {t} {tri:?} has non-positive area {area:e}"
                )));
            }
            // grad lambda_i = rot90(opposite edge) / (2 area)
            let grad = |a: Point, b: Point| [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
            basis_grads.push([grad(q, r), grad(r, p), grad(p, q)]);
            areas.push(area);
        }

        // directed edge -> owning triangle
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::MeshFormat(format!(
                        "directed edge {e:?} appears twice; triangles are inconsistently oriented"
                    )));
                }
            }
        }
        let mut unmatched: Vec<(usize, usize)> = directed
            .keys()
            .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
            .copied()
            .collect();
        unmatched.sort_unstable();

        let mut edges = Vec::with_capacity(boundary.len());
        let mut seen = HashMap::with_capacity(boundary.len());
        for (i, (a, b, tag)) in boundary.into_iter().enumerate() {
            let (a, b) = match (directed.get(&(a, b)), directed.get(&(b, a))) {
                (Some(_), None) => (a, b),
                (None, Some(_)) => (b, a),
                _ => {
                    return Err(Error::MeshFormat(format!(
                        "listed boundary edge {i} ({a}, {b}) does not belong to exactly one triangle"
                    )))
                }
            };
            if seen.insert((a, b), i).is_some() {
                return Err(Error::MeshFormat(format!("boundary edge ({a}, {b}) listed twice")));
            }
            let owner = directed[&(a, b)];
            let (p, q) = (vertices[a], vertices[b]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let length = d[0].hypot(d[1]);
            edges.push(BoundaryEdge {
                a,
                b,
                tag,
                owner,
                normal: [d[1] / length, -d[0] / length],
                length,
            });
        }
        if let Some(&(a, b)) = unmatched.iter().find(|e| !seen.contains_key(e)) {
            return Err(Error::MeshFormat(format!(
                "edge ({a}, {b}) lies on the boundary but carries no tag"
            )));
        }

        // closed loops: every boundary vertex is entered as often as it is left
        let mut balance = vec![0i64; nv];
        for e in &edges {
            balance[e.a] += 1;
            balance[e.b] -= 1;
        }
        if let Some(v) = balance.iter().position(|&d| d != 0) {
            return Err(Error::MeshFormat(format!("boundary is not closed at vertex {v}")));
        }

        singular.sort_unstable();
        singular.dedup();
        if let Some(&v) = singular.iter().find(|&&v| v >= nv) {
            return Err(Error::MeshFormat(format!("singular vertex {v} out of range")));
        }

        let mut mesh = Self {
            vertices,
            triangles,
            boundary: edges,
            singular,
            areas,
            basis_grads,
            hash: 0,
        };
        mesh.hash = mesh.compute_hash();
        Ok(mesh)
    }

    fn compute_hash(&self) -> u64 {
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        for t in &self.triangles {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
        }
        for e in &self.boundary {
            h.update((e.a as u64).to_le_bytes());
            h.update((e.b as u64).to_le_bytes());
            h.update(e.tag.as_bytes());
            h.update([0u8]);
        }
        for v in &self.singular {
            h.update((*v as u64).to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Vertices declared singular by the generator (the tip of a cusp, ...).
    pub fn singular_vertices(&self) -> &[usize] {
        &self.singular
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn basis_gradients(&self, t: usize) -> &[Point; 3] {
        &self.basis_grads[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Content hash identifying this mesh; fields record it to detect mismatches.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .fold(0.0, f64::max)
    }

    /// Vertices lying on the boundary, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self.boundary.iter().flat_map(|e| [e.a, e.b]).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for e in &self.boundary {
            mask[e.a] = true;
            mask[e.b] = true;
        }
        mask
    }

    /// Geometric region names present on the boundary, sorted.
    pub fn boundary_tags(&self) -> Vec<&str> {
        let mut tags: Vec<&str> = self.boundary.iter().map(|e| e.tag.as_str()).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    /// Undirected edges `(min, max)` in first-encounter order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = std::collections::HashSet::with_capacity(3 * self.triangles.len());
        let mut out = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key) {
                    out.push(key);
                }
            }
        }
        out
    }

    /// True when no triangle has an angle above 90 degrees.
    pub fn is_nonobtuse(&self) -> bool {
        self.triangles.iter().all(|t| {
            (0..3).all(|k| {
                let p = self.vertices[t[k]];
                let q = self.vertices[t[(k + 1) % 3]];
                let r = self.vertices[t[(k + 2) % 3]];
                let dot = (q[0] - p[0]) * (r[0] - p[0]) + (q[1] - p[1]) * (r[1] - p[1]);
                let scale = (q[0] - p[0]).hypot(q[1] - p[1]) * (r[0] - p[0]).hypot(r[1] - p[1]);
                dot >= -1e-12 * scale
            })
        })
    }

    /// Area of the polygon(s) traced by the oriented boundary loops.
    pub fn boundary_enclosed_area(&self) -> f64 {
        self.boundary
            .iter()
            .map(|e| {
                let (p, q) = (self.vertices[e.a], self.vertices[e.b]);
                0.5 * (p[0] * q[1] - q[0] * p[1])
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = vec![[0, 1, 2], [0, 2, 3]];
        let b = vec![
            (0, 1, "bottom".to_string()),
            (1, 2, "right".into()),
            (2, 3, "top".into()),
            (3, 0, "left".into()),
        ];
        Mesh::from_parts(v, t, b, vec![]).unwrap()
    }

    #[test]
    fn normals_point_outward() {
        let m = square();
        let n: Vec<_> = m.boundary_edges().iter().map(|e| (e.tag.as_str(), e.normal)).collect();
        assert_eq!(n[0], ("bottom", [0.0, -1.0]));
        assert_eq!(n[1], ("right", [1.0, 0.0]));
        assert_eq!(n[2], ("top", [0.0, 1.0]));
        assert_eq!(n[3], ("left", [-1.0, 0.0]));
    }

    #[test]
    fn reversed_boundary_listing_is_reoriented() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = vec![(1, 0, "s".to_string()), (2, 1, "s".into()), (0, 2, "s".into())];
        let m = Mesh::from_parts(v, vec![[0, 1, 2]], b, vec![]).unwrap();
        assert_eq!((m.boundary_edges()[0].a, m.boundary_edges()[0].b), (0, 1));
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::from_parts(v, vec![[0, 2, 1]], vec![], vec![]).unwrap_err();
        assert!(err.to_string().contains("non-positive area"));
    }

    #[test]
    fn untagged_boundary_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = vec![(0, 1, "s".to_string()), (1, 2, "s".into())];
        let err = Mesh::from_parts(v, vec![[0, 1, 2]], b, vec![]).unwrap_err();
        assert!(err.to_string().contains("carries no tag"));
    }

    #[test]
    fn interior_edge_cannot_be_boundary() {
        let m = square();
        let v = m.vertices().to_vec();
        let mut b: Vec<_> = m.boundary_edges().iter().map(|e| (e.a, e.b, e.tag.clone())).collect();
        b.push((0, 2, "diag".into()));
        assert!(Mesh::from_parts(v, m.triangles().to_vec(), b, vec![]).is_err());
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let m = square();
        for t in 0..m.n_triangles() {
            let g = m.basis_gradients(t);
            assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-15);
            assert!((g[0][1] + g[1][1] + g[2][1]).abs() < 1e-15);
        }
        assert_eq!(m.total_area(), 1.0);
        assert_eq!(m.boundary_enclosed_area(), 1.0);
    }
}
