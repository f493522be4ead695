//! Meshes of the model domains, boundary partitions and the inner metric.

mod builders;
mod io;
mod mesh;
mod metric;
mod partition;

pub use builders::{
    build_annulus, build_cusp, build_cusp_graded, build_disk, build_rectangle, build_unit_square, refine,
    refine_times, refinement_parents, DomainSpec, CUSP_GRADING,
};
pub use io::MeshFile;
pub use mesh::{BoundaryEdge, Mesh, Point};
pub use metric::{inner_metric, InnerMetric};
pub use partition::{p_threshold, tag_boundary, BoundaryPartition, Condition, DeclaredDim, EdgeSelector};
