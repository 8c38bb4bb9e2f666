use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument fell outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violated a stated constraint.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The online executor ran out of target servers while in strict mode.
    #[error(
        "target pool exhausted: lookahead {lookahead} violates ceil(target/(lookahead*drafter)) <= SP={sp_degree} \
         (minimum feasible lookahead is {min_lookahead})"
    )]
    PoolExhausted {
        sp_degree: usize,
        lookahead: usize,
        min_lookahead: usize,
    },

    /// Malformed input at a specific line of a JSONL or key-value file.
    #[error("{source_name}, line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
