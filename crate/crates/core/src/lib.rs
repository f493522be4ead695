//! Finite-element workbench for Sobolev-space identities on planar domains
//! whose frontier carries isolated singular points.
//!
//! The crate discretizes functions with continuous piecewise-linear (P1)
//! elements and vector fields with piecewise constants, and provides:
//!
//! * [`geometry`]: structured meshes of the unit square, rectangles, disks,
//!   annuli and cusps, boundary tagging, red refinement, and the inner
//!   (edge-path) metric.
//! * [`fem`]: gradient, weak divergence, pairings, `L^p` norms, trace,
//!   cotrace and the integration-by-parts residual.
//! * [`laplace`]: mixed Dirichlet/Neumann and pure Neumann Laplace solves.
//! * [`plaplace`]: the normalized duality map, p-Dirichlet energy, the
//!   trace-constrained p-energy minimizer and its optimality certificates.
//! * [`verify`]: experiment harness (Poincaré constants, the punctured-disk
//!   counterexample, Hölder exponent estimation, convergence studies).
//! * [`cli`]: configuration parsing and orchestration behind the `varfem`
//!   binary.

pub mod cli;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod plaplace;
pub mod verify;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::fem::{
        boundary_pairing, cotrace, gradient, ibp_residual, lp_norm, scalar_inner, trace, vector_inner,
        weak_divergence, BoundaryTrace, IbpTerms, Region, ScalarField, VectorField,
    };
    pub use crate::geometry::{
        build_annulus, build_cusp, build_disk, build_rectangle, build_unit_square, inner_metric, p_threshold,
        refine, tag_boundary, BoundaryPartition, Condition, DeclaredDim, DomainSpec, EdgeSelector,
        InnerMetric, Mesh,
    };
    pub use crate::laplace::{
        compatibility_defect, solve_mixed, solve_neumann, weak_residual, MixedProblem, NeumannProblem,
    };
    pub use crate::plaplace::{
        minimality_certificate, p_energy, p_stationarity, sharp_p, solve_p_laplace, OptimalityReport,
        PlapOptions, PlapProblem,
    };
}
