//! Batch front-end: fitting, order search, classification, reports and plots.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::fmt;

use memfract::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// A failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Degenerate(_)
            | Error::NoSolution { .. }
            | Error::Conditioning { .. }
            | Error::Singularity { .. }
            | Error::GammaPole(_) => EXIT_DEGENERATE,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::TooShort { .. }
            | Error::Shape(_)
            | Error::NoVertex { .. }
            | Error::Underdetermined { .. }
            | Error::Domain { .. }
            | Error::Parameter(_)
            | Error::OpenSweep { .. }
            | Error::Io(_) => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::NoSolution { step: 0.01 }).code, EXIT_DEGENERATE);
        assert_eq!(CliError::from(Error::Degenerate("flat".into())).code, EXIT_DEGENERATE);
        assert_eq!(CliError::from(Error::Validation("bad".into())).code, EXIT_INPUT);
        assert_eq!(CliError::from(Error::Parameter("bad".into())).code, EXIT_INPUT);
    }
}
