//! Number partitioning reduced to L1-minus-L2 sparse recovery.
//!
//! Given a multiset `S = {a_1, ..., a_m}` of integers, the reduction builds a
//! small linear system `Ax = b` whose sparse-recovery formulations (equality
//! constrained or penalized least squares, signed or nonnegative) attain a
//! closed-form optimal value exactly when `S` splits into two halves of equal
//! sum. The crate provides:
//!
//! * [`model`] - problem instances, objective and feasibility evaluation;
//! * [`reduction`] - instance builders, closed-form targets, certificate
//!   decoding, and a partition decision procedure driven by optimization;
//! * [`oracles`] - independent exact and exhaustive checkers (subset-sum brute
//!   force, pattern enumeration, dense grid search, finite differences) used
//!   to validate every analytic claim numerically;
//! * [`solvers`] - difference-of-convex descent with an accelerated proximal
//!   inner loop, a quadratic-penalty wrapper for the constrained forms, and a
//!   seeded multi-start driver.
//!
//! Exactness discipline: every statement about the partition itself (subset
//! sums, balance, certificates) is computed in integer arithmetic and is never
//! derived from floating-point output. Solvers only ever upgrade a numeric
//! minimum to a YES answer by decoding an exact certificate from the point.

pub mod corpus;
pub mod model;
pub mod oracles;
pub mod reduction;
pub mod solvers;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input multiset was empty.
    #[error("multiset must contain at least one element")]
    EmptyMultiset,
    /// A vector or matrix had the wrong dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A point contained NaN or infinite entries.
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    /// Parameters inconsistent with the problem kind.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// An enumeration or grid would exceed its configured cap.
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    /// A point could not be matched to any pattern within tolerance.
    #[error("point is not a pattern point: {0}")]
    NotPatternPoint(String),
    /// Operation does not apply to this problem kind.
    #[error("unsupported kind: {0}")]
    UnsupportedKind(String),
    /// A numeric routine produced a non-finite intermediate.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
