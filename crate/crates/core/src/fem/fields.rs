use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{refinement_parents, BoundaryPartition, Condition, Mesh, Point};

fn check_hash(expected: u64, found: u64) -> Result<()> {
    if expected != found {
        return Err(Error::MeshMismatch { expected, found });
    }
    Ok(())
}

/// Continuous piecewise-linear function given by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    mesh_hash: u64,
}

impl ScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::invalid(format!(
                "scalar field has {} values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("scalar field value {i} is not finite")));
        }
        Ok(Self {
            values,
            mesh_hash: mesh.hash(),
        })
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        Self::new(mesh, values).expect("interpolated function must be finite")
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::from_fn(mesh, |_| c)
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh_hash(&self) -> u64 {
        self.mesh_hash
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_hash(mesh.hash(), self.mesh_hash)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            mesh_hash: self.mesh_hash,
        }
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, b: f64, other: &ScalarField) -> Result<Self> {
        check_hash(self.mesh_hash, other.mesh_hash)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            mesh_hash: self.mesh_hash,
        })
    }

    pub(crate) fn from_raw(mesh_hash: u64, values: Vec<f64>) -> Self {
        Self { values, mesh_hash }
    }

    /// Exact interpolation into `fine = refine(coarse)`; P1 spaces are nested.
    pub fn prolong(&self, coarse: &Mesh, fine: &Mesh) -> Result<Self> {
        self.check(coarse)?;
        let parents = refinement_parents(coarse);
        if coarse.n_vertices() + parents.len() != fine.n_vertices() {
            return Err(Error::invalid("fine mesh is not a red refinement of the coarse mesh"));
        }
        let mut values = self.values.clone();
        values.extend(parents.iter().map(|&(a, b)| 0.5 * (self.values[a] + self.values[b])));
        ScalarField::new(fine, values)
    }
}

/// Piecewise-constant vector field, one value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    values: Vec<[f64; 2]>,
    mesh_hash: u64,
}

impl VectorField {
    pub fn new(mesh: &Mesh, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != mesh.n_triangles() {
            return Err(Error::invalid(format!(
                "vector field has {} values for {} triangles",
                values.len(),
                mesh.n_triangles()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::invalid(format!("vector field value {i} is not finite")));
        }
        Ok(Self {
            values,
            mesh_hash: mesh.hash(),
        })
    }

    /// Samples `f` at element centroids.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let values = (0..mesh.n_triangles()).map(|t| f(mesh.centroid(t))).collect();
        Self::new(mesh, values).expect("sampled field must be finite")
    }

    pub fn constant(mesh: &Mesh, v: [f64; 2]) -> Self {
        Self::from_fn(mesh, |_| v)
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn mesh_hash(&self) -> u64 {
        self.mesh_hash
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_hash(mesh.hash(), self.mesh_hash)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| [a * v[0], a * v[1]]).collect(),
            mesh_hash: self.mesh_hash,
        }
    }

    pub fn axpby(&self, a: f64, b: f64, other: &VectorField) -> Result<Self> {
        check_hash(self.mesh_hash, other.mesh_hash)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1]])
                .collect(),
            mesh_hash: self.mesh_hash,
        })
    }

    pub(crate) fn from_raw(mesh_hash: u64, values: Vec<[f64; 2]>) -> Self {
        Self { values, mesh_hash }
    }
}

/// A portion of the boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Dirichlet,
    Neumann,
    Whole,
    /// Edges carrying this geometric tag.
    Tag(String),
}

impl Region {
    /// Boundary edges of the region, in mesh order.
    pub fn edges(&self, mesh: &Mesh, partition: &BoundaryPartition) -> Result<Vec<usize>> {
        partition.check_mesh(mesh)?;
        let n = mesh.boundary_edges().len();
        Ok(match self {
            Region::Whole => (0..n).collect(),
            Region::Dirichlet => partition.edges_with(Condition::Dirichlet),
            Region::Neumann => partition.edges_with(Condition::Neumann),
            Region::Tag(t) => {
                if !mesh.boundary_tags().contains(&t.as_str()) {
                    return Err(Error::UnknownRegion(t.clone()));
                }
                (0..n).filter(|&e| mesh.boundary_edges()[e].tag == *t).collect()
            }
        })
    }

    /// Vertices of the region (endpoints of its edges), sorted.
    pub fn vertices(&self, mesh: &Mesh, partition: &BoundaryPartition) -> Result<Vec<usize>> {
        let mut vs: Vec<usize> = self
            .edges(mesh, partition)?
            .into_iter()
            .flat_map(|e| {
                let edge = &mesh.boundary_edges()[e];
                [edge.a, edge.b]
            })
            .collect();
        vs.sort_unstable();
        vs.dedup();
        Ok(vs)
    }

    pub fn parse(s: &str) -> Region {
        match s {
            "dirichlet" | "gamma_d" => Region::Dirichlet,
            "neumann" | "gamma_n" => Region::Neumann,
            "whole" | "all" | "boundary" => Region::Whole,
            other => Region::Tag(other.to_string()),
        }
    }
}

/// What a [`BoundaryTrace`] is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Nodal values on the region's vertices (traces).
    Vertices,
    /// One value per region edge (cotraces, fluxes).
    Edges,
}

/// Boundary values on a region: `(index, value)` pairs sorted by index,
/// where the index is a vertex or a boundary-edge index per [`Support`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    region: Region,
    support: Support,
    entries: Vec<(usize, f64)>,
    mesh_hash: u64,
}

impl BoundaryTrace {
    pub fn new(mesh: &Mesh, region: Region, support: Support, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("boundary trace lists an index twice"));
        }
        if let Some(&(i, _)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("boundary trace value at {i} is not finite")));
        }
        Ok(Self {
            region,
            support,
            entries,
            mesh_hash: mesh.hash(),
        })
    }

    /// Edge data on `region` from a function of the edge midpoint and outward normal.
    pub fn edge_data(
        mesh: &Mesh,
        partition: &BoundaryPartition,
        region: Region,
        f: impl Fn(Point, Point) -> f64,
    ) -> Result<Self> {
        let entries = region
            .edges(mesh, partition)?
            .into_iter()
            .map(|e| {
                let edge = &mesh.boundary_edges()[e];
                (e, f(edge.midpoint(mesh), edge.normal))
            })
            .collect();
        Self::new(mesh, region, Support::Edges, entries)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .ok()
            .map(|k| self.entries[k].1)
    }

    pub fn mesh_hash(&self) -> u64 {
        self.mesh_hash
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_hash(mesh.hash(), self.mesh_hash)
    }

    /// `L^2` norm on the boundary of edge data, `sqrt(sum len * value^2)`.
    pub fn edge_l2_norm(&self, mesh: &Mesh) -> f64 {
        match self.support {
            Support::Edges => self
                .entries
                .iter()
                .map(|&(e, v)| mesh.boundary_edges()[e].length * v * v)
                .sum::<f64>()
                .sqrt(),
            Support::Vertices => self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// On-disk field representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldFile {
    Scalar {
        values: Vec<f64>,
        mesh_hash: String,
    },
    Vector {
        values: Vec<[f64; 2]>,
        mesh_hash: String,
    },
    Trace {
        region: Region,
        support: Support,
        values: Vec<(usize, f64)>,
        mesh_hash: String,
    },
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

fn parse_hash(s: &str) -> Result<u64> {
    u64::from_str_radix(s, 16).map_err(|_| Error::invalid(format!("malformed mesh_hash `{s}`")))
}

impl From<&ScalarField> for FieldFile {
    fn from(f: &ScalarField) -> Self {
        FieldFile::Scalar {
            values: f.values.clone(),
            mesh_hash: hash_hex(f.mesh_hash),
        }
    }
}

impl From<&VectorField> for FieldFile {
    fn from(f: &VectorField) -> Self {
        FieldFile::Vector {
            values: f.values.clone(),
            mesh_hash: hash_hex(f.mesh_hash),
        }
    }
}

impl From<&BoundaryTrace> for FieldFile {
    fn from(f: &BoundaryTrace) -> Self {
        FieldFile::Trace {
            region: f.region.clone(),
            support: f.support,
            values: f.entries.clone(),
            mesh_hash: hash_hex(f.mesh_hash),
        }
    }
}

impl FieldFile {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn into_scalar(self, mesh: &Mesh) -> Result<ScalarField> {
        match self {
            FieldFile::Scalar { values, mesh_hash } => {
                check_hash(mesh.hash(), parse_hash(&mesh_hash)?)?;
                ScalarField::new(mesh, values)
            }
            _ => Err(Error::invalid("expected a scalar field file")),
        }
    }

    pub fn into_vector(self, mesh: &Mesh) -> Result<VectorField> {
        match self {
            FieldFile::Vector { values, mesh_hash } => {
                check_hash(mesh.hash(), parse_hash(&mesh_hash)?)?;
                VectorField::new(mesh, values)
            }
            _ => Err(Error::invalid("expected a vector field file")),
        }
    }

    pub fn into_trace(self, mesh: &Mesh) -> Result<BoundaryTrace> {
        match self {
            FieldFile::Trace {
                region,
                support,
                values,
                mesh_hash,
            } => {
                check_hash(mesh.hash(), parse_hash(&mesh_hash)?)?;
                BoundaryTrace::new(mesh, region, support, values)
            }
            _ => Err(Error::invalid("expected a trace file")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_unit_square, refine};

    #[test]
    fn length_and_finiteness_checked() {
        let m = build_unit_square(2).unwrap();
        assert!(ScalarField::new(&m, vec![0.0; 8]).is_err());
        assert!(ScalarField::new(&m, vec![f64::NAN; 9]).is_err());
        assert!(VectorField::new(&m, vec![[0.0, 0.0]; 7]).is_err());
        assert!(VectorField::new(&m, vec![[0.0, f64::INFINITY]; 8]).is_err());
    }

    #[test]
    fn mismatched_meshes_detected() {
        let a = build_unit_square(2).unwrap();
        let b = build_unit_square(3).unwrap();
        let u = ScalarField::zeros(&a);
        assert!(matches!(u.check(&b), Err(Error::MeshMismatch { .. })));
        assert!(u.axpby(1.0, 1.0, &ScalarField::zeros(&b)).is_err());
    }

    #[test]
    fn prolongation_is_exact_for_affine_functions() {
        let c = build_unit_square(3).unwrap();
        let f = refine(&c);
        let lin = |p: Point| 3.0 * p[0] - 2.0 * p[1] + 0.5;
        let u = ScalarField::from_fn(&c, lin).prolong(&c, &f).unwrap();
        let direct = ScalarField::from_fn(&f, lin);
        for (a, b) in u.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_region_is_an_error() {
        let m = build_unit_square(2).unwrap();
        let p = BoundaryPartition::all_dirichlet(&m);
        assert!(matches!(Region::Tag("nowhere".into()).edges(&m, &p), Err(Error::UnknownRegion(_))));
        assert_eq!(Region::Tag("left".into()).edges(&m, &p).unwrap().len(), 2);
        assert!(Region::Neumann.edges(&m, &p).unwrap().is_empty());
    }

    #[test]
    fn field_files_round_trip() {
        let m = build_unit_square(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let u = ScalarField::from_fn(&m, |p| p[0].sin() + 1e-300 * p[1]);
        let path = dir.path().join("u.json");
        FieldFile::from(&u).write(&path).unwrap();
        assert_eq!(FieldFile::read(&path).unwrap().into_scalar(&m).unwrap(), u);

        let other = build_unit_square(3).unwrap();
        assert!(FieldFile::read(&path).unwrap().into_scalar(&other).is_err());
        assert!(FieldFile::read(&path).unwrap().into_vector(&m).is_err());
    }
}
