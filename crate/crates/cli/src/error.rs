use thiserror::Error;

/// Command-line error classes, one exit code each: usage/config problems exit
/// 1, data problems exit 2, numeric infeasibility exits 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<odit::Error> for CliError {
    fn from(e: odit::Error) -> Self {
        use odit::Error as E;
        match &e {
            E::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            E::SingularCovariance(_) | E::TargetUnreachable { .. } | E::AlreadyStopped(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
