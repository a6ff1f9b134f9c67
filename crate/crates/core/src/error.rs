use thiserror::Error;

/// Errors raised by the channel statistics engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrisError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested configuration cannot be realised (e.g. too many active elements).
    #[error("configuration error: {0}")]
    Config(String),

    /// Dimensions of the operands do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The composite matrix has no eigenvalue above the rank threshold.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// A numerical identity drifted beyond its tolerance.
    #[error("conditioning failure: {0}")]
    Conditioning(String),

    /// A regime-specific formula was requested outside its validity range.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// An iterative integrator failed to reach its target accuracy.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },
}

pub type Result<T> = std::result::Result<T, FrisError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FrisError::Domain(msg.into()))
}
