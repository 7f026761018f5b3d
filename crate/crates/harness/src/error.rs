use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("invalid config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] seqanm::Error),

    #[error("serializing metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// True for problems with the user's input rather than the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::UnknownKey(_)
                | HarnessError::Syntax { .. }
                | HarnessError::Config { .. }
                | HarnessError::Io { .. }
                | HarnessError::Core(seqanm::Error::InvalidConfig { .. })
        )
    }
}
