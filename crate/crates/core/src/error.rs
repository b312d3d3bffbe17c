//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by model construction, evaluation, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// A type or routine was handed parameters outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A numeric evaluation left the domain where the quantity is defined
    /// (e.g. CRRA utility at non-positive final wealth).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two alternatives are payoff-identical, so no indifference point exists.
    #[error("degenerate pair: alternatives {j} and {k} have identical payoffs")]
    DegeneratePair { j: usize, k: usize },

    /// The expected-utility gap between a pair of alternatives changed sign
    /// more than once over the search range. Under the maintained
    /// single-crossing property this cannot happen, so it signals a
    /// utility-family bug or an ill-posed menu.
    #[error(
        "single-crossing violation for pair ({j}, {k}): gap changes sign {crossings} times over the search range"
    )]
    SingleCrossingViolation { j: usize, k: usize, crossings: usize },

    /// An iterative routine exhausted its iteration budget.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A numerical routine failed (bracketing, overflow, NaN, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Dataset rows violate the documented data contract.
    #[error("data validation failed: {0}")]
    DataValidation(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV parse/serialize failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
