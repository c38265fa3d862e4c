use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{entity}: {message}")]
    Invalid { entity: String, message: String },
    #[error("{entity}: {source}")]
    Build {
        entity: String,
        #[source]
        source: algebroid::Error,
    },
    #[error("override `{spec}`: {message}")]
    Override { spec: String, message: String },
    #[error("reference cycle: {0}")]
    Cycle(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
