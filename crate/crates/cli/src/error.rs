use nonlinritz::certify::CertificateReport;
use nonlinritz::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The report was written; it carries at least one failure.
    #[error("{failed} certificate(s) failed")]
    CertificateFailed {
        failed: usize,
        report: Box<CertificateReport>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CertificateFailed { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Core error raised while building from the config.
    pub fn config(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }

    /// Core error raised while computing; argument errors still count as
    /// configuration problems.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_)
            | CoreError::InvalidDomain(_)
            | CoreError::Incompatible(_)
            | CoreError::UnsupportedGradientMode(_)
            | CoreError::GridTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }

    pub fn io(what: &str, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{what}: {e}"))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::from_core(e)
    }
}
