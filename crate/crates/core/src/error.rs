use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The budget cannot be stored or can never be recovered.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The instance is too large for an enumeration-based routine.
    #[error("size limit exceeded: {0}")]
    Size(String),

    /// The normal approximation has zero variance (p = 0 or p = 1).
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    /// Root bracketing failed.
    #[error("no root: {0}")]
    NoRoot(String),
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
