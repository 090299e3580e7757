//! Error type shared by every module.

use alloc::string::String;

use crate::weights::{AdditionalSymbol, Weight};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid weight system: {0}")]
    InvalidSystem(String),
    #[error("weight {0} uses a symbol outside the basis")]
    SymbolOutsideBasis(Weight),
    #[error("weight system must be non-negative")]
    NotNonNegative,
    #[error("weight {0} is not an element of the system")]
    NotInSystem(Weight),
    #[error("no basic weight separates the base from its complement")]
    NoFiberDirection,
    #[error("lift {0} is already applied")]
    LiftRepeated(AdditionalSymbol),
    #[error("lift {0} breaks the canonical lift order")]
    LiftOutOfOrder(AdditionalSymbol),
    #[error("unknown coordinate {0}")]
    UnknownCoordinate(String),
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("expected weight {expected}, found {found}")]
    WeightMismatch { expected: Weight, found: Weight },
    #[error("parity mismatch for {0}")]
    ParityMismatch(String),
    #[error("operation lowers polynomial degree, truncated terms would leak back")]
    DegreeLowering,
    #[error("truncation overflow at degree {0}")]
    TruncationOverflow(u32),
    #[error("no operator for {0}")]
    MissingOperator(AdditionalSymbol),
    #[error("operator is degenerate on weight {0}")]
    Degenerate(Weight),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("kernel hypothesis violated")]
    KernelHypothesis,
    #[error("linear system has no solution")]
    NoSolution,
    #[error("cancelled")]
    Cancelled,
}
