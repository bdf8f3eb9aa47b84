use std::fmt;
use std::process::ExitCode;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or model specification (exit 1).
    Usage(String),
    /// Unreadable, malformed or inconsistent input (exit 2).
    Data(String),
    /// Optimization or other numerical failure (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::Usage(m) | Self::Data(m) | Self::Numerical(m) => m,
        };
        // Diagnostics are one line.
        f.write_str(&msg.replace('\n', " "))
    }
}

impl From<betats::Error> for CliError {
    fn from(e: betats::Error) -> Self {
        use betats::Error as E;
        let msg = e.to_string();
        match e {
            E::Spec(_) => Self::Usage(msg),
            E::Domain(_) | E::Data(_) | E::Dimension(_) | E::MissingColumn(_) => Self::Data(msg),
            E::Convergence { .. } | E::Numerical(_) | E::Inadmissible(_) => Self::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Data(format!("CSV error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
