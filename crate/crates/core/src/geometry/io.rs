//! JSON mesh files.
//!
//! ```json
//! {"vertices": [[x, y], ...], "triangles": [[i, j, k], ...],
//!  "boundary_edges": [[i, j, "tag"], ...], "singular_vertices": [i, ...]}
//! ```
//!
//! Coordinates are written with shortest round-trip decimal formatting, so a
//! write/read cycle reproduces every `f64` bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, Point};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<(usize, usize, String)>,
    pub singular_vertices: Vec<usize>,
}

impl From<&Mesh> for MeshFile {
    fn from(mesh: &Mesh) -> Self {
        Self {
            vertices: mesh.vertices().to_vec(),
            triangles: mesh.triangles().to_vec(),
            boundary_edges: mesh
                .boundary_edges()
                .iter()
                .map(|e| (e.a, e.b, e.tag.clone()))
                .collect(),
            singular_vertices: mesh.singular_vertices().to_vec(),
        }
    }
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<Mesh> {
        Mesh::from_parts(self.vertices, self.triangles, self.boundary_edges, self.singular_vertices)
    }
}

impl Mesh {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeshFile::from(self)).expect("mesh serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Mesh> {
        serde_json::from_str::<MeshFile>(s)?.into_mesh()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Mesh> {
        Mesh::from_json(&fs::read_to_string(path)?)
    }
}
