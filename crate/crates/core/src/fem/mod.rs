//! Discrete operators on P1 nodal functions and piecewise-constant vector
//! fields: gradient, weak divergence, pairings, norms, trace and cotrace.

pub mod assembly;
mod fields;
mod ops;

pub use fields::{hash_hex, BoundaryTrace, FieldFile, Region, ScalarField, Support, VectorField};
pub use ops::{
    boundary_pairing, cotrace, gradient, ibp_residual, l2_error, load, lp_norm, scalar_inner, trace,
    vector_inner, w12_norm, weak_divergence, IbpTerms, LpNorm, lp_of_magnitudes,
};
