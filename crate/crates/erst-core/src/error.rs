//! Error taxonomy shared by every module of the engine.
//!
//! Variants are grouped by how a caller should react: malformed inputs
//! (dimensions, ranges, missing pieces), numeric preconditions that failed
//! (symmetry, positive definiteness, degenerate data), and targets that are
//! provably unattainable for the given portfolio.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, ErstError>;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ErstError {
    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A NaN or infinity appeared where a finite number is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A matrix that must be symmetric is not.
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:.3e}")]
    NotSymmetric { max_asymmetry: f64 },

    /// A covariance (or scatter) matrix is not positive definite.
    #[error("matrix is not positive definite: smallest eigenvalue = {min_eigenvalue:.6e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// A scalar parameter is outside its admissible range.
    #[error("{name} = {value} is outside the valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Structurally valid input that is numerically unusable
    /// (zero-variance factor, zero diagonal, degenerate direction, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed structured input (bad block ranges, label mismatches, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested P&L target lies beyond what the portfolio can attain.
    #[error("target {target} is unreachable: attainable bound is {bound}")]
    UnreachableTarget { target: f64, bound: f64 },

    /// No sampled point satisfied the target (brute-force oracles).
    #[error("no feasible point found: {0}")]
    Infeasible(String),

    /// The secular function was evaluated at a pole
    /// (shift equal to minus an eigenvalue that carries a nonzero loading).
    #[error("secular function pole at mu = {mu}")]
    SecularPole { mu: f64 },

    /// The leading principal component is not identified
    /// (top eigenvalue repeated within tolerance).
    #[error(
        "principal component selection is ambiguous: leading eigenvalues \
         {first:.6e} and {second:.6e} are tied"
    )]
    AmbiguousComponent { first: f64, second: f64 },

    /// A cluster map without fitted betas was asked to reconstruct scenarios.
    #[error("cluster map carries no betas; run the beta regression first")]
    MissingBetas,
}
