use alloc::string::String;

/// Errors raised by the core toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A token id or other input fell outside its valid domain.
    #[error("input domain error: {0}")]
    Domain(String),
    /// A configuration value violates its documented range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A non-finite value appeared during objective evaluation.
    #[error("numerical failure in rollout {rollout}: {detail}")]
    Numerical { rollout: usize, detail: String },
}

pub type Result<T> = core::result::Result<T, Error>;
