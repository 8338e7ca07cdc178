//! Process exit codes and the error type that maps onto them.

use std::fmt;
use std::path::Path;

use bwopt::BwError;

/// Stable exit codes.
pub mod code {
    /// Run converged, or a non-solver command finished.
    pub const OK: u8 = 0;
    /// Command-line usage error (emitted by the argument parser).
    pub const USAGE: u8 = 2;
    /// A gradient tolerance was requested and the iteration budget ran out
    /// first.
    pub const BUDGET_EXHAUSTED: u8 = 3;
    /// Eigendecomposition failure, loss of definiteness, non-finite values.
    pub const NUMERICAL: u8 = 4;
    /// File could not be read or written, or its contents could not be parsed.
    pub const IO_PARSE: u8 = 5;
    /// Inputs parsed but are unusable: bad parameters, atoms outside the
    /// solver's spectral box, dimension mismatches.
    pub const INVALID_INPUT: u8 = 6;
    /// `validate` found a malformed trace or summary.
    pub const VALIDATION: u8 = 7;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(code::INVALID_INPUT, message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(code::IO_PARSE, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<BwError> for CliError {
    fn from(e: BwError) -> Self {
        let code = match &e {
            BwError::Io(_) | BwError::Json(_) | BwError::Format(_) => code::IO_PARSE,
            e if e.is_numerical() => code::NUMERICAL,
            _ => code::INVALID_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn library_errors_map_to_codes() {
        let numerical = BwError::NumericalFailure { context: "eigen", matrix: Box::new(DMatrix::zeros(1, 1)) };
        assert_eq!(CliError::from(numerical).code, code::NUMERICAL);
        let wrapped = BwError::AtIteration { iteration: 3, source: Box::new(BwError::NonFinite) };
        assert_eq!(CliError::from(wrapped).code, code::NUMERICAL);
        assert_eq!(CliError::from(BwError::Format("x".into())).code, code::IO_PARSE);
        assert_eq!(CliError::from(BwError::EmptyDistribution).code, code::INVALID_INPUT);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(BwError::Io(io)).code, code::IO_PARSE);
    }
}
