//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// A single violated invariant of a candidate d-permutation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    /// No coordinate columns were supplied (d would be 1).
    #[error("empty column set")]
    EmptyColumnSet,
    /// The permutation has size zero.
    #[error("size must be at least 1")]
    EmptySize,
    /// A column has a different length from the first column.
    #[error("column {column}: length {len}, expected {expected}")]
    WrongLength {
        /// 1-based column number.
        column: usize,
        /// Observed length.
        len: usize,
        /// Length of the first column.
        expected: usize,
    },
    /// A value outside `1..=n`.
    #[error("column {column}: value {value} out of range 1..={n}")]
    OutOfRange {
        /// 1-based column number.
        column: usize,
        /// Offending value.
        value: usize,
        /// Permutation size.
        n: usize,
    },
    /// A value occurring twice in one column.
    #[error("column {column}: duplicate value {value}")]
    Duplicate {
        /// 1-based column number.
        column: usize,
        /// Offending value.
        value: usize,
    },
}

/// Errors reported by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input failed permutation validation.
    #[error("invalid permutation: {}", join(.0))]
    InvalidPermutation(Vec<ValidationError>),
    /// Two objects of different dimensions were combined.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    /// An index or coordinate outside the admissible range.
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange {
        /// Offending 1-based index.
        index: usize,
        /// Largest admissible index.
        max: usize,
    },
    /// Exhaustive enumeration requested beyond the configured limit.
    #[error("pattern size {k} exceeds the enumeration limit {limit}")]
    EnumerationLimit {
        /// Requested pattern size.
        k: usize,
        /// Configured limit.
        limit: usize,
    },
    /// Two points share a coordinate value, so their relative order is undefined.
    #[error("tie in coordinate {0}")]
    Tie(usize),
    /// A computation would exceed its configured budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// A rejection sampler hit its retry cap.
    #[error("retry cap of {0} attempts exhausted")]
    RetryExhausted(u64),
    /// Malformed input that is not a permutation-validation failure.
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn join(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// True for errors that signal an exhausted budget or retry cap.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Budget(_) | Error::RetryExhausted(_) | Error::EnumerationLimit { .. }
        )
    }
}
