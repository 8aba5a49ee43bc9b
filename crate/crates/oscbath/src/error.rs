use thiserror::Error;

/// Errors produced by bath construction, fitting, inversion and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to reach its accuracy contract.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// Caller violated a structural precondition (grids, dimensions, layouts).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Operator or state dimensions do not match the model layout.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Requested object would exceed the configured memory cap.
    #[error("memory cap exceeded: {0}")]
    MemoryCap(String),

    /// Degenerate spectrum where non-degeneracy is required.
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    /// Malformed configuration or serialized input.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
