use std::fmt;

use thiserror::Error;

/// One violated invariant together with the residual that violated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub what: &'static str,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (residual {:.3e})", self.what, self.residual)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {object}: {}", join(.violations))]
    Invalid {
        object: &'static str,
        violations: Vec<Violation>,
    },

    #[error("zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("history {0} is not a member of the set")]
    NotAMember(String),

    #[error("phase-ambiguous inhomogeneous history {0}: its chains disagree at the perturbed slot")]
    PhaseAmbiguous(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("state is not pure")]
    NotPure,

    #[error("history set is not decoherent: |D({row},{col})| = {magnitude:.3e}")]
    NotDecoherent {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(object: &'static str, violations: Vec<Violation>) -> Self {
        Error::Invalid { object, violations }
    }

    /// True for faults that signal a broken algebraic identity rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
