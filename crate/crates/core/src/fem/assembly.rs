//! Global P1 matrices. Elements are visited in index order so that every
//! matrix entry is summed in a fixed order.

use crate::geometry::Mesh;
use crate::linalg::CsrMatrix;

/// Symmetric 2x2 tensor per element: `[[a11, a12], [a12, a22]]`.
pub type Tensor = [[f64; 2]; 2];

/// Stiffness matrix `K_ij = <grad phi_i, grad phi_j>`.
pub fn stiffness_matrix(mesh: &Mesh) -> CsrMatrix {
    weighted_stiffness(mesh, |_| [[1.0, 0.0], [0.0, 1.0]])
}

/// `A_ij = sum_T area * grad phi_i . W_T grad phi_j`.
pub fn weighted_stiffness(mesh: &Mesh, weight: impl Fn(usize) -> Tensor) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        let g = mesh.basis_gradients(t);
        let w = weight(t);
        for i in 0..3 {
            let wg = [
                w[0][0] * g[i][0] + w[0][1] * g[i][1],
                w[1][0] * g[i][0] + w[1][1] * g[i][1],
            ];
            for j in 0..3 {
                triplets.push((tri[i], tri[j], area * (wg[0] * g[j][0] + wg[1] * g[j][1])));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Consistent mass matrix `M_ij = <phi_i, phi_j>`.
pub fn mass_matrix(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { area / 6.0 } else { area / 12.0 };
                triplets.push((tri[i], tri[j], w));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// `<g, phi_i>` for every vertex `i`, exact for P1 `g`.
pub fn load_vector(mesh: &Mesh, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        let sum: f64 = tri.iter().map(|&v| g[v]).sum();
        for &v in tri {
            out[v] += area / 12.0 * (g[v] + sum);
        }
    }
    out
}

/// `<theta, tr phi_i>` for edge data `theta` given as `(edge, value)`:
/// each edge contributes `len * value / 2` to both endpoints.
pub fn boundary_load(mesh: &Mesh, edge_values: &[(usize, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for &(e, v) in edge_values {
        let edge = &mesh.boundary_edges()[e];
        let half = 0.5 * edge.length * v;
        out[edge.a] += half;
        out[edge.b] += half;
    }
    out
}
