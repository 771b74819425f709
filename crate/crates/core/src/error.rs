use thiserror::Error;

/// Errors returned by the library.
///
/// Variants split into input problems (bad configuration, wrong sizes) and
/// numerical problems (gap closures, degenerate spectra, failed integration);
/// [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schema version {found} is not supported (expected {expected})")]
    Schema { expected: u32, found: u32 },

    #[error("gap closed: {0}")]
    Transition(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("integration did not converge: {0}")]
    Convergence(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Transition(_) | Error::Degenerate(_) | Error::Convergence(_) | Error::LinearSolve(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
