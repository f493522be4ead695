use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, Point};
use crate::error::{Error, Result};

/// Boundary condition type carried by a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Dirichlet,
    Neumann,
}

/// Chooses boundary edges for [`tag_boundary`].
pub enum EdgeSelector {
    All,
    /// Edges whose geometric tag equals the given name.
    Tag(String),
    /// Edges whose midpoint satisfies the predicate.
    Midpoint(Box<dyn Fn(Point) -> bool + Send + Sync>),
}

impl EdgeSelector {
    pub fn tag(name: impl Into<String>) -> Self {
        EdgeSelector::Tag(name.into())
    }

    pub fn midpoint(f: impl Fn(Point) -> bool + Send + Sync + 'static) -> Self {
        EdgeSelector::Midpoint(Box::new(f))
    }

    fn matches(&self, mesh: &Mesh, edge: usize) -> bool {
        let e = &mesh.boundary_edges()[edge];
        match self {
            EdgeSelector::All => true,
            EdgeSelector::Tag(t) => e.tag == *t,
            EdgeSelector::Midpoint(f) => f(e.midpoint(mesh)),
        }
    }
}

impl fmt::Debug for EdgeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeSelector::All => write!(f, "All"),
            EdgeSelector::Tag(t) => write!(f, "Tag({t:?})"),
            EdgeSelector::Midpoint(_) => write!(f, "Midpoint(..)"),
        }
    }
}

/// Assignment of a [`Condition`] to every boundary edge, together with the
/// finite singular set `E` and an optional constraint vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    mesh_hash: u64,
    conditions: Vec<Condition>,
    declared_singular: BTreeSet<usize>,
    singular: BTreeSet<usize>,
    constraint: BTreeSet<usize>,
}

/// Tags every boundary edge with exactly one condition.
///
/// `E` is the union of the mesh's declared singular vertices and every
/// vertex where the condition changes between adjacent boundary edges.
pub fn tag_boundary(mesh: &Mesh, rules: &[(EdgeSelector, Condition)]) -> Result<BoundaryPartition> {
    let mut conditions = Vec::with_capacity(mesh.boundary_edges().len());
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        let mut hit = rules.iter().filter(|(sel, _)| sel.matches(mesh, i)).map(|(_, c)| *c);
        let first = hit.next().ok_or(Error::BoundaryCoverage {
            edge: i,
            a: e.a,
            b: e.b,
            problem: "not covered by any selector",
        })?;
        if hit.next().is_some() {
            return Err(Error::BoundaryCoverage {
                edge: i,
                a: e.a,
                b: e.b,
                problem: "covered by more than one selector",
            });
        }
        conditions.push(first);
    }
    Ok(BoundaryPartition::from_conditions(mesh, conditions))
}

impl BoundaryPartition {
    pub fn from_conditions(mesh: &Mesh, conditions: Vec<Condition>) -> Self {
        assert_eq!(conditions.len(), mesh.boundary_edges().len());
        let declared_singular: BTreeSet<usize> = mesh.singular_vertices().iter().copied().collect();
        let mut touches_d = vec![false; mesh.n_vertices()];
        let mut touches_n = vec![false; mesh.n_vertices()];
        for (e, c) in mesh.boundary_edges().iter().zip(&conditions) {
            let mask = match c {
                Condition::Dirichlet => &mut touches_d,
                Condition::Neumann => &mut touches_n,
            };
            mask[e.a] = true;
            mask[e.b] = true;
        }
        let mut singular = declared_singular.clone();
        singular.extend((0..mesh.n_vertices()).filter(|&v| touches_d[v] && touches_n[v]));
        Self {
            mesh_hash: mesh.hash(),
            conditions,
            declared_singular,
            singular,
            constraint: BTreeSet::new(),
        }
    }

    /// Every edge Dirichlet.
    pub fn all_dirichlet(mesh: &Mesh) -> Self {
        Self::from_conditions(mesh, vec![Condition::Dirichlet; mesh.boundary_edges().len()])
    }

    /// Every edge Neumann.
    pub fn all_neumann(mesh: &Mesh) -> Self {
        Self::from_conditions(mesh, vec![Condition::Neumann; mesh.boundary_edges().len()])
    }

    pub fn with_constraint(mut self, vertices: impl IntoIterator<Item = usize>) -> Self {
        self.constraint = vertices.into_iter().collect();
        self
    }

    pub fn mesh_hash(&self) -> u64 {
        self.mesh_hash
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_hash != mesh.hash() {
            return Err(Error::MeshMismatch {
                expected: mesh.hash(),
                found: self.mesh_hash,
            });
        }
        Ok(())
    }

    pub fn condition(&self, edge: usize) -> Condition {
        self.conditions[edge]
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn edges_with(&self, c: Condition) -> Vec<usize> {
        (0..self.conditions.len()).filter(|&e| self.conditions[e] == c).collect()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.conditions.contains(&Condition::Dirichlet)
    }

    /// Endpoints of Dirichlet edges, sorted. These are the vertices where
    /// Dirichlet data is imposed strongly (including `E` vertices touching
    /// a Dirichlet edge).
    pub fn dirichlet_vertices(&self, mesh: &Mesh) -> Vec<usize> {
        let set: BTreeSet<usize> = mesh
            .boundary_edges()
            .iter()
            .zip(&self.conditions)
            .filter(|(_, &c)| c == Condition::Dirichlet)
            .flat_map(|(e, _)| [e.a, e.b])
            .collect();
        set.into_iter().collect()
    }

    /// The singular set `E`.
    pub fn singular_set(&self) -> &BTreeSet<usize> {
        &self.singular
    }

    /// Singular vertices declared by the mesh generator (`M_sigma`).
    pub fn declared_singular(&self) -> &BTreeSet<usize> {
        &self.declared_singular
    }

    pub fn constraint(&self) -> &BTreeSet<usize> {
        &self.constraint
    }

    /// Carries the partition over to `fine = refine(coarse)`: child edges
    /// inherit their parent's condition and `E` only grows.
    pub fn refined(&self, coarse: &Mesh, fine: &Mesh) -> Result<Self> {
        self.check_mesh(coarse)?;
        if fine.boundary_edges().len() != 2 * coarse.boundary_edges().len() {
            return Err(Error::invalid("fine mesh is not a red refinement of the coarse mesh"));
        }
        let conditions = self.conditions.iter().flat_map(|&c| [c, c]).collect();
        let mut p = Self::from_conditions(fine, conditions);
        p.singular.extend(self.singular.iter().copied());
        p.constraint = self.constraint.clone();
        Ok(p)
    }
}

/// Declared dimension of a subset of the frontier; `Empty` stands for
/// `dim ∅ = −∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredDim {
    Empty,
    Dim(u32),
}

impl DeclaredDim {
    fn as_f64(self) -> f64 {
        match self {
            DeclaredDim::Empty => f64::NEG_INFINITY,
            DeclaredDim::Dim(d) => f64::from(d),
        }
    }
}

/// Threshold exponent `p_M(A) = m − max(dim(cl A \ int A), dim M_σ)` with
/// `m = 2`.
///
/// `frontier_of_a` is the dimension of `cl A \ int_{∂M} A` and `singular`
/// the dimension of `M_σ`. Both sets have codimension at least two, so any
/// declared dimension above zero is rejected. Returns `+∞` when both are
/// empty.
pub fn p_threshold(partition: &BoundaryPartition, frontier_of_a: DeclaredDim, singular: DeclaredDim) -> Result<f64> {
    const M: u32 = 2;
    for (name, d) in [("frontier of A", frontier_of_a), ("M_sigma", singular)] {
        if let DeclaredDim::Dim(k) = d {
            if k > M - 2 {
                return Err(Error::invalid(format!(
                    "declared dimension {k} of {name} exceeds m - 2 = {}",
                    M - 2
                )));
            }
        }
    }
    if singular == DeclaredDim::Empty && !partition.declared_singular().is_empty() {
        return Err(Error::invalid(
            "M_sigma declared empty but the mesh declares singular vertices",
        ));
    }
    let worst = frontier_of_a.as_f64().max(singular.as_f64());
    Ok(f64::from(M) - worst)
}
