use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what} sums to {sum}, expected 1")]
    SumMismatch { what: &'static str, sum: f64 },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty {what}")]
    Empty { what: &'static str },

    #[error("p places mass {mass} at index {index} where q has none")]
    SupportViolation { index: usize, mass: f64 },

    #[error("bound is degenerate: {0}")]
    BoundDegenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "bracket failure: I(X;T) = {ixt_lo} at beta_lo and {ixt_hi} at beta_hi are on the same side of target {target}"
    )]
    BracketFailure {
        target: f64,
        ixt_lo: f64,
        ixt_hi: f64,
    },
}

impl Error {
    /// True for failures of the numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BracketFailure { .. })
    }
}
