use thiserror::Error;

use crate::complexity::ComplexityError;
use crate::ladder::LadderError;
use crate::panel::PanelError;
use crate::simgen::SimError;
use crate::survival::SurvivalError;

/// Coarse error classes used for exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Io,
    Schema,
    Parse,
    Data,
    Spec,
    Capacity,
    Numeric,
    Argument,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Schema => "schema",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Data => "data",
            ErrorCategory::Spec => "spec",
            ErrorCategory::Capacity => "capacity",
            ErrorCategory::Numeric => "numeric",
            ErrorCategory::Argument => "argument",
        }
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Complexity(#[from] ComplexityError),
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Panel(e) => e.category(),
            Error::Complexity(e) => e.category(),
            Error::Survival(e) => e.category(),
            Error::Ladder(e) => e.category(),
            Error::Sim(e) => e.category(),
            Error::Io(_) => ErrorCategory::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
