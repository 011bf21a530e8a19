use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameter or malformed input detected at construction.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An evaluation point lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The short-run and long-run measures do not carry equal mass.
    #[error("unbalanced measures: |lambda| - |kappa| = {discrepancy:e} exceeds tolerance {tol:e}")]
    Unbalanced { discrepancy: f64, tol: f64 },

    /// A tabulated density reaches the edge of its table with no declared
    /// tail index, so integrals over the unbounded remainder are undefined.
    #[error("tail undetermined: {0}")]
    TailUndetermined(String),

    /// The kernel is not square integrable, so stationary quantities do not exist.
    #[error("kernel not square integrable: {0}")]
    NotSquareIntegrable(String),

    /// The model admits no stationary limit (margin at or above one).
    #[error("no stationary limit: {0}")]
    NonStationary(String),

    /// Tail index sits on a boundary the asymptotic formulas do not cover.
    #[error("unsupported boundary case: {0}")]
    UnsupportedBoundary(String),

    /// A time or lag does not sit on the requested grid.
    #[error("grid error: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
