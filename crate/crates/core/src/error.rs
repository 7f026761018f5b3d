use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The top-`L` eigenvalues of a Toeplitz block cannot be told apart from
    /// the rest, so there is no dominant `L`-dimensional signal subspace.
    #[error("degenerate signal subspace: {0}")]
    DegenerateSubspace(String),

    #[error("matrix is indefinite beyond tolerance (min eigenvalue {min_eig:e}, allowed {allowed:e})")]
    Indefinite { min_eig: f64, allowed: f64 },

    #[error("model is not identifiable: {0}")]
    Unidentifiable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(key: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key,
            reason: reason.into(),
        }
    }
}
