use std::path::PathBuf;

use mpt_core::config::ConfigError;
use mpt_core::dynamics::DynamicsError;
use mpt_core::magnetostatics::FieldError;
use mpt_core::spectral::SpectralError;
use mpt_core::sweep::SweepError;
use serde_json::json;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Numeric,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Numeric => 3,
            Kind::Io => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Numeric => "numeric",
            Kind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Numeric,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self {
            kind: Kind::Io,
            message: format!("{}: {e}", path.display()),
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self, command: &str) -> String {
        json!({
            "error": self.kind.name(),
            "command": command,
            "message": self.message,
            "exit_code": self.kind.exit_code(),
        })
        .to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self {
                kind: Kind::Io,
                message: e.to_string(),
            },
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::InvalidGeometry(_)
            | FieldError::InvalidDrive(_)
            | FieldError::InvalidRequest(_) => Self::config(e.to_string()),
            _ => Self::numeric(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidConfig(_) => Self::config(e.to_string()),
            DynamicsError::Field(f) => f.into(),
            _ => Self::numeric(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidParameter(_) => Self::config(e.to_string()),
            _ => Self::numeric(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidPlan(_) => Self::config(e.to_string()),
            SweepError::Io(_) => Self {
                kind: Kind::Io,
                message: e.to_string(),
            },
            SweepError::Spectral(s) => s.into(),
            _ => Self::numeric(e.to_string()),
        }
    }
}

/// Attaches the path to an I/O error.
pub trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> IoContext<T> for Result<T, E> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, CliError> {
        self.map_err(|e| CliError::io(&path.into(), e))
    }
}
