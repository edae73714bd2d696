use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{dataset}: record `{record_id}`, estimator `{estimator}`: {source}")]
    Scoring {
        dataset: String,
        record_id: String,
        estimator: String,
        #[source]
        source: Box<cocoa_core::Error>,
    },

    #[error("{dataset}: no `{strategy}` quality for scored record `{record_id}`")]
    MissingQuality {
        dataset: String,
        record_id: String,
        strategy: String,
    },

    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: Box<cocoa_core::Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn data(context: impl Into<String>, source: cocoa_core::Error) -> Self {
        RunError::Data { context: context.into(), source: Box::new(source) }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RunError::Io { context: context.into(), source }
    }

    /// 2 config, 3 data, 4 provider.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Scoring { source, .. } | RunError::Data { source, .. } if source.is_provider() => 4,
            _ => 3,
        }
    }
}
