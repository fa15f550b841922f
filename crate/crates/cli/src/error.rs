use std::fmt;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config file, input file or output path.
    Config(String),
    /// The computation itself failed.
    Numeric(String),
    /// `verify` ran and at least one property failed.
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            CliError::VerifyFailed(names) => {
                write!(f, "verification failed: {}", names.join(", "))
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<cavity_purify::Error> for CliError {
    fn from(e: cavity_purify::Error) -> Self {
        use cavity_purify::Error as E;
        match e {
            E::NotHermitian { .. } | E::Numeric(_) | E::ProtocolFailure { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
