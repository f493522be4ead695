use thiserror::Error;

use crate::fem::ScalarField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("field belongs to a different mesh (expected {expected:016x}, found {found:016x})")]
    MeshMismatch { expected: u64, found: u64 },

    #[error("unknown boundary region `{0}`")]
    UnknownRegion(String),

    #[error("boundary edge {edge} ({a}, {b}) is {problem}")]
    BoundaryCoverage {
        edge: usize,
        a: usize,
        b: usize,
        problem: &'static str,
    },

    #[error("vertex {target} is unreachable from vertex {from} on the edge graph")]
    Disconnected { from: usize, target: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("compatibility condition violated: <g,1> - <theta,tr 1> = {defect:.6e} exceeds tolerance {tolerance:.3e}")]
    Incompatible { defect: f64, tolerance: f64 },

    #[error("p-Laplace solve stopped with stationarity {stationarity:.3e} above tolerance {tolerance:.3e}")]
    PlapNotConverged {
        stationarity: f64,
        tolerance: f64,
        best: Box<ScalarField>,
    },

    #[error("mesh file: {0}")]
    MeshFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Failures that come from numerics rather than from the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Incompatible { .. } | Error::PlapNotConverged { .. }
        )
    }
}
