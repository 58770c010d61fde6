use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a documented invariant (negative cost, bad lifetime, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A model or experiment is misconfigured (pmf does not normalize, probability out of range, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A period or state index falls outside the modelled range.
    #[error("range error: {0}")]
    Range(String),
    /// The requested computation needs a capability the model lacks.
    #[error("capability error: {0}")]
    Capability(String),
    /// A one-dimensional search ran into its upper bound.
    #[error("search bound exceeded: {0}")]
    SearchBound(String),
    /// A state space or enumeration exceeds the configured limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// Two results that must agree do not.
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
