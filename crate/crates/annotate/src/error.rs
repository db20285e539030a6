use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown image id `{0}`")]
    UnknownId(String),
    #[error("image `{0}` has been deleted")]
    Deleted(String),
    #[error("empty selection")]
    EmptyRange,
    #[error("selection is not a contiguous chronological run: {0}")]
    NotContiguous(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] egoact::Error),
}

impl AnnotateError {
    /// Whether the caller can fix the request (as opposed to a server-side failure).
    pub fn is_validation(&self) -> bool {
        match self {
            AnnotateError::Core(e) => e.is_validation(),
            _ => true,
        }
    }
}

pub type Result<T, E = AnnotateError> = std::result::Result<T, E>;
