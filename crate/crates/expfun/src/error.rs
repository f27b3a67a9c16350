use thiserror::Error;

/// Errors across the crate. Every variant names the violated precondition so
/// the CLI can surface it verbatim.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The step law has an atom with multiplier >= 1, so the affine maps are
    /// not all contractions and no attractor analysis applies.
    #[error("non-contractive step law: atom {index} has multiplier {gamma} >= 1 (need all < 1)")]
    NonContractive { index: usize, gamma: f64 },

    /// Adjacent map images share interior points; dimension formulas that
    /// presume separation are not asserted here.
    #[error("overlapping map images: {0}")]
    Overlapping(String),

    /// E(log xi) >= 0, so the series diverges almost surely.
    #[error("divergent series: E(log xi) = {log_moment} >= 0")]
    Divergent { log_moment: f64 },

    /// A moment or bound was requested outside its finiteness domain.
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
