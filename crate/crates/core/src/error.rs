use std::path::PathBuf;

/// Errors produced by screening, analysis and rendering.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid address: {0}")]
    Addressing(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("incomplete screen: {0}")]
    IncompleteScreen(String),

    #[error("missing stage `{stage}`: {detail}")]
    MissingStage { stage: &'static str, detail: String },

    #[error("adapter protocol violation: {0}")]
    Adapter(String),

    #[error("weight file: {0}")]
    WeightFile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Addressing(_) => "addressing",
            Error::State(_) => "state",
            Error::Input(_) => "input",
            Error::IncompleteScreen(_) => "incomplete_screen",
            Error::MissingStage { .. } => "missing_stage",
            Error::Adapter(_) => "adapter",
            Error::WeightFile(_) => "weight_file",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
