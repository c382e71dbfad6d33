use thiserror::Error;

/// Failure of a pluggable provider (entity extraction, alternatives
/// suggestion, embeddings). Callers degrade instead of failing the pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned a malformed response: {0}")]
    Malformed(String),
}
