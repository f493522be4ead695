use super::assembly::{load_vector, mass_matrix};
use super::fields::{BoundaryTrace, Region, ScalarField, Support, VectorField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPartition, Mesh, Point};
use crate::linalg::{pcg, CgOptions};

/// Elementwise gradient of the P1 interpolant; exact for affine functions.
pub fn gradient(mesh: &Mesh, u: &ScalarField) -> Result<VectorField> {
    u.check(mesh)?;
    let values = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let g = mesh.basis_gradients(t);
            let mut out = [0.0; 2];
            for k in 0..3 {
                let uk = u.values()[tri[k]];
                out[0] += uk * g[k][0];
                out[1] += uk * g[k][1];
            }
            out
        })
        .collect();
    Ok(VectorField::from_raw(mesh.hash(), values))
}

/// `<u, v> = ∫ u v`, exact for P1 functions (consistent mass pairing).
pub fn scalar_inner(mesh: &Mesh, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.check(mesh)?;
    v.check(mesh)?;
    let (u, v) = (u.values(), v.values());
    Ok(mesh
        .triangles()
        .iter()
        .zip(mesh.areas())
        .map(|(tri, &area)| {
            let diag: f64 = tri.iter().map(|&i| u[i] * v[i]).sum();
            let su: f64 = tri.iter().map(|&i| u[i]).sum();
            let sv: f64 = tri.iter().map(|&i| v[i]).sum();
            area / 12.0 * (diag + su * sv)
        })
        .sum())
}

/// `<β, γ> = Σ_T area (β · γ)`.
pub fn vector_inner(mesh: &Mesh, beta: &VectorField, gamma: &VectorField) -> Result<f64> {
    beta.check(mesh)?;
    gamma.check(mesh)?;
    Ok(beta
        .values()
        .iter()
        .zip(gamma.values())
        .zip(mesh.areas())
        .map(|((b, g), &area)| area * (b[0] * g[0] + b[1] * g[1]))
        .sum())
}

/// Fields that have an `L^p` norm.
pub trait LpNorm {
    /// Per-element magnitude used for the norm.
    fn element_magnitudes(&self, mesh: &Mesh) -> Result<Vec<f64>>;

    /// Exact `L^2` norm when the element rule is not exact.
    fn exact_l2(&self, _mesh: &Mesh) -> Result<Option<f64>> {
        Ok(None)
    }
}

impl LpNorm for ScalarField {
    /// Absolute value at the element centroid.
    fn element_magnitudes(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        self.check(mesh)?;
        let u = self.values();
        Ok(mesh
            .triangles()
            .iter()
            .map(|tri| ((u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0).abs())
            .collect())
    }

    fn exact_l2(&self, mesh: &Mesh) -> Result<Option<f64>> {
        Ok(Some(scalar_inner(mesh, self, self)?.max(0.0).sqrt()))
    }
}

impl LpNorm for VectorField {
    fn element_magnitudes(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        self.check(mesh)?;
        Ok(self.values().iter().map(|v| v[0].hypot(v[1])).collect())
    }
}

/// `(Σ area |value|^p)^(1/p)`, or the largest magnitude for `p = ∞`.
///
/// Scalar fields use the exact P1 integral at `p = 2` and centroid values
/// otherwise.
pub fn lp_norm<F: LpNorm + ?Sized>(mesh: &Mesh, field: &F, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p == 2.0 {
        if let Some(exact) = field.exact_l2(mesh)? {
            return Ok(exact);
        }
    }
    let mags = field.element_magnitudes(mesh)?;
    Ok(lp_of_magnitudes(mesh.areas(), &mags, p))
}

pub fn lp_of_magnitudes(areas: &[f64], mags: &[f64], p: f64) -> f64 {
    let max = mags.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    // scaled by the maximum to stay finite for large p
    let sum: f64 = areas.iter().zip(mags).map(|(a, m)| a * (m / max).powf(p)).sum();
    max * sum.powf(1.0 / p)
}

/// `sqrt(||u||_{L^2}^2 + ||∂u||_{L^2}^2)`.
pub fn w12_norm(mesh: &Mesh, u: &ScalarField) -> Result<f64> {
    let g = gradient(mesh, u)?;
    Ok((scalar_inner(mesh, u, u)? + vector_inner(mesh, &g, &g)?).max(0.0).sqrt())
}

/// Nodal weak divergence `d` of a piecewise-constant field.
///
/// Solves `<d, φ_i> = −<β, ∂φ_i> + <γ_ν β, tr φ_i>` for every vertex `i`.
/// At interior vertices the boundary term vanishes, which is the usual weak
/// divergence tested against interior hats; at boundary vertices the edge
/// flux term makes `<β, ∂u> + <d, u> = <γ_ν β, tr u>` hold for every nodal
/// `u`.
pub fn weak_divergence(mesh: &Mesh, partition: &BoundaryPartition, beta: &VectorField) -> Result<ScalarField> {
    partition.check_mesh(mesh)?;
    beta.check(mesh)?;
    let mut rhs = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        let g = mesh.basis_gradients(t);
        let b = beta.values()[t];
        for k in 0..3 {
            rhs[tri[k]] -= area * (b[0] * g[k][0] + b[1] * g[k][1]);
        }
    }
    for e in mesh.boundary_edges() {
        let b = beta.values()[e.owner];
        let half = 0.5 * e.length * (b[0] * e.normal[0] + b[1] * e.normal[1]);
        rhs[e.a] += half;
        rhs[e.b] += half;
    }
    let mass = mass_matrix(mesh);
    let opts = CgOptions {
        rel_tol: 1e-14,
        ..CgOptions::for_size(mesh.n_vertices())
    };
    let out = pcg(&mass, &rhs, &vec![0.0; rhs.len()], opts)?;
    Ok(ScalarField::from_raw(mesh.hash(), out.solution))
}

/// Nodal restriction of `u` to the vertices of `region`.
pub fn trace(mesh: &Mesh, partition: &BoundaryPartition, u: &ScalarField, region: Region) -> Result<BoundaryTrace> {
    u.check(mesh)?;
    let entries = region
        .vertices(mesh, partition)?
        .into_iter()
        .map(|v| (v, u.values()[v]))
        .collect();
    BoundaryTrace::new(mesh, region, Support::Vertices, entries)
}

/// Normal flux `β · ν` on every edge of `region`, from the owning triangle.
pub fn cotrace(mesh: &Mesh, partition: &BoundaryPartition, beta: &VectorField, region: Region) -> Result<BoundaryTrace> {
    beta.check(mesh)?;
    let entries = region
        .edges(mesh, partition)?
        .into_iter()
        .map(|e| {
            let edge = &mesh.boundary_edges()[e];
            let b = beta.values()[edge.owner];
            (e, b[0] * edge.normal[0] + b[1] * edge.normal[1])
        })
        .collect();
    BoundaryTrace::new(mesh, region, Support::Edges, entries)
}

/// `<γ_ν β, tr u> ≈ ∮ (β·ν) u ds`: edge length times flux times the mean of
/// `u` at the two endpoints, summed over the region's edges.
pub fn boundary_pairing(mesh: &Mesh, tr_u: &BoundaryTrace, cotr: &BoundaryTrace) -> Result<f64> {
    tr_u.check(mesh)?;
    cotr.check(mesh)?;
    if tr_u.region() != cotr.region() {
        return Err(Error::invalid(format!(
            "pairing a trace on {:?} with a cotrace on {:?}",
            tr_u.region(),
            cotr.region()
        )));
    }
    if tr_u.support() != Support::Vertices || cotr.support() != Support::Edges {
        return Err(Error::invalid("boundary pairing needs a vertex trace and an edge cotrace"));
    }
    let mut sum = 0.0;
    for &(e, flux) in cotr.entries() {
        let edge = &mesh.boundary_edges()[e];
        let (ua, ub) = match (tr_u.get(edge.a), tr_u.get(edge.b)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::invalid(format!("trace misses an endpoint of boundary edge {e}"))),
        };
        sum += edge.length * flux * 0.5 * (ua + ub);
    }
    Ok(sum)
}

/// The three terms of `<β, ∂u> + <∇β, u> = <γ_ν β, tr u>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpTerms {
    pub volume: f64,
    pub divergence: f64,
    pub boundary: f64,
}

impl IbpTerms {
    pub fn residual(&self) -> f64 {
        self.volume + self.divergence - self.boundary
    }

    /// Residual relative to the magnitude of the terms.
    pub fn relative(&self) -> f64 {
        let scale = self.volume.abs() + self.divergence.abs() + self.boundary.abs();
        if scale == 0.0 {
            0.0
        } else {
            self.residual().abs() / scale
        }
    }
}

/// Evaluates the integration-by-parts identity with a supplied divergence
/// (weak or analytic) over `region`.
pub fn ibp_residual(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    u: &ScalarField,
    beta: &VectorField,
    div_beta: &ScalarField,
    region: Region,
) -> Result<IbpTerms> {
    let grad = gradient(mesh, u)?;
    let volume = vector_inner(mesh, beta, &grad)?;
    let divergence = scalar_inner(mesh, div_beta, u)?;
    let boundary = boundary_pairing(
        mesh,
        &trace(mesh, partition, u, region.clone())?,
        &cotrace(mesh, partition, beta, region)?,
    )?;
    Ok(IbpTerms {
        volume,
        divergence,
        boundary,
    })
}

// Symmetric 6-point rule, exact for degree 4 (barycentric coordinates, weight).
const QUAD6: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

/// `||u − exact||_{L^2}` by degree-4 quadrature on every element.
pub fn l2_error(mesh: &Mesh, u: &ScalarField, exact: impl Fn(Point) -> f64) -> Result<f64> {
    u.check(mesh)?;
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let uv = tri.map(|v| u.values()[v]);
        for (bary, w) in QUAD6 {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let uh = bary[0] * uv[0] + bary[1] * uv[1] + bary[2] * uv[2];
            let d = uh - exact(x);
            sum += w * mesh.areas()[t] * d * d;
        }
    }
    Ok(sum.sqrt())
}

/// `<g, φ_i>` for every vertex.
pub fn load(mesh: &Mesh, g: &ScalarField) -> Result<Vec<f64>> {
    g.check(mesh)?;
    Ok(load_vector(mesh, g.values()))
}
