use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural requirement (lengths, ordering, signs).
    #[error("invalid track: {0}")]
    InvalidTrack(String),

    /// A numeric argument is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampler or mixture-state invariant does not hold.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Problem too large for exact enumeration.
    #[error("oracle limit exceeded: {0}")]
    TooLarge(String),

    /// Malformed row in a track file; rows are 1-based and exclude the header.
    #[error("parse error at row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
