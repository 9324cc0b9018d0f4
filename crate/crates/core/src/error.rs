use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Arguments disagree on user count, bin count or action count.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no usable spectrum: every bin has zero direct gain")]
    NoUsableSpectrum,

    #[error("oracle scale exceeded: {evaluations} joint allocations exceed the cap of {cap}")]
    OracleScaleExceeded { evaluations: u128, cap: u128 },

    #[error("degenerate game: {0}")]
    Degenerate(String),

    #[error("no pure Nash equilibrium reached within {steps} best-response steps")]
    NoPureNashReached { steps: usize },

    #[error("ensemble unstable: {skipped} of {attempted} channel draws failed to converge")]
    EnsembleUnstable { skipped: usize, attempted: usize },

    /// The simplex solver reported a state that cannot occur for the programs
    /// built in this crate (for example an empty correlated-equilibrium polytope).
    #[error("linear program failure: {0}")]
    LinearProgram(String),

    #[error("empty averaging window")]
    EmptyWindow,
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
