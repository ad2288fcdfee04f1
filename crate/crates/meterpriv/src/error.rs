use std::path::PathBuf;

/// Errors of the harness layer; library errors pass through as `Core`.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        field: String,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] meterpriv_core::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input files or configs (including
    /// values the library rejects up front), 3 for infeasible instances,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use meterpriv_core::Error as E;
        match self {
            HarnessError::Parse { .. } | HarnessError::Config(_) => 2,
            HarnessError::Core(
                E::InvalidTrace(_)
                | E::InvalidTariff(_)
                | E::InvalidBattery(_)
                | E::InvalidParameter(_)
                | E::NotStochastic { .. }
                | E::NegativeProbability
                | E::CutoffAboveNyquist { .. },
            ) => 2,
            HarnessError::Core(meterpriv_core::Error::Infeasible { .. })
            | HarnessError::Core(meterpriv_core::Error::InfeasibleInstance { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
