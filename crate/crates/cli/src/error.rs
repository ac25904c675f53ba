use dicke_core::Error as EngineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Engine {
        context: String,
        #[source]
        source: EngineError,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn engine(context: impl Into<String>) -> impl FnOnce(EngineError) -> CliError {
        let context = context.into();
        move |source| CliError::Engine { context, source }
    }

    /// 2 for anything the user can fix in the config, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine { source: EngineError::InvalidParameter(_) | EngineError::Dimension(_), .. } => 2,
            CliError::Engine { .. } | CliError::Io { .. } => 3,
        }
    }
}
