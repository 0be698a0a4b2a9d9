use std::fmt;
use std::process::ExitCode;

use asd_core::Error;

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Config = 2,
    Data = 3,
    Artifact = 4,
    Mismatch = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Default classification; call sites that load artifacts override it.
pub fn classify(e: &Error) -> Code {
    match e {
        Error::Config(_) => Code::Config,
        Error::ArtifactFormat(_) | Error::VersionMismatch { .. } | Error::Corrupt(_) => Code::Artifact,
        Error::DimensionMismatch { .. } => Code::Mismatch,
        _ => Code::Data,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(classify(&e), e.to_string())
    }
}

pub trait OrExit<T> {
    /// Attaches a fixed exit code and a context prefix.
    fn or_exit(self, code: Code, what: &str) -> Result<T, Failure>;
    /// Keeps the default classification, adding a context prefix.
    fn context(self, what: &str) -> Result<T, Failure>;
}

impl<T> OrExit<T> for Result<T, Error> {
    fn or_exit(self, code: Code, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(code, format!("{what}: {e}")))
    }

    fn context(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(classify(&e), format!("{what}: {e}")))
    }
}
