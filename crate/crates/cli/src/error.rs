use std::path::PathBuf;

use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] neyman::Error),
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub const EXIT_USAGE: i32 = 2;
    pub const EXIT_DATA: i32 = 3;
    pub const EXIT_NUMERIC: i32 = 4;

    /// 2 for usage errors, 3 for unusable input data, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use neyman::Error as E;
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } | CliError::Json(_) => Self::EXIT_DATA,
            CliError::Model(e) => match e {
                E::RankDeficient { .. }
                | E::NonFinite(_)
                | E::LeverageOne(_)
                | E::DegenerateVariance
                | E::DegenerateAuxiliary
                | E::ExcessiveFailures { .. } => Self::EXIT_NUMERIC,
                E::OutOfDomain(_) | E::TooManySubsets { .. } | E::InvalidSampleSize { .. } => Self::EXIT_USAGE,
                _ => Self::EXIT_DATA,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
