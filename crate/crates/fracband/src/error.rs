//! Crate-wide error type, grouped by the failure class each operation reports.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, geometry, or plan configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Iterative solver ran out of its iteration budget.
    #[error("no convergence within {iterations} iterations (last relative energy change {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// One or more cells of a band-structure assembly failed; pairs are (k index, band).
    #[error("convergence failed for (k, band) cells {cells:?}")]
    CellFailures { cells: Vec<(usize, usize)> },

    /// Matrix factorization or eigendecomposition failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Config file does not match the documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A fit was requested on data that cannot support it.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Not enough accepted fits or records to produce the requested report.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Unknown export format or similar usage error.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 configuration/validation, 3 convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } | Error::CellFailures { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
