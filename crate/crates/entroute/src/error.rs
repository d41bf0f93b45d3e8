//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rates, probabilities or counts outside their valid range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A constraint has no solution for the given inputs (e.g. a threshold
    /// below the feasibility cutoff, or an optimizer that found no feasible
    /// point).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A payoff pair that violates the optimality relation beyond tolerance.
    #[error("inconsistent payoffs: payoff {payoff} exceeds optimum {optimum} by more than {tol}")]
    InconsistentPayoffs { payoff: f64, optimum: f64, tol: f64 },

    /// Malformed caller input (unsorted grids, length mismatches, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration file problems.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
