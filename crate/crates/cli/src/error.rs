use std::fmt;
use std::process::ExitCode;

use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Divergent(String),
    Unconverged(String),
    Compute(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergent(_) => 3,
            CliError::Unconverged(_) => 4,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Divergent(_) => "divergent",
            CliError::Unconverged(_) => "unconverged",
            CliError::Compute(_) => "compute",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Divergent(m)
            | CliError::Unconverged(m)
            | CliError::Compute(m)
            | CliError::Io(m) => m,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        json!({ "error": self.kind(), "message": self.message(), "exit_code": self.exit_code() }).to_string()
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{}", self.record());
        ExitCode::from(self.exit_code())
    }

    /// Core errors raised while checking the configuration.
    pub fn invalid(e: coherent_dfs::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<coherent_dfs::Error> for CliError {
    fn from(e: coherent_dfs::Error) -> Self {
        use coherent_dfs::Error as E;
        match e {
            E::Divergent { .. } => CliError::Divergent(e.to_string()),
            E::Unconverged { .. } => CliError::Unconverged(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}
