//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by generators, fitters, and the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed an argument outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A random-graph construction could not be realized.
    #[error("graph generation failed: {0}")]
    Generation(String),

    /// Cross-product design matrix is singular in an unpenalized fit.
    #[error("singular design: columns {columns:?} are collinear (consider an l2 penalty)")]
    SingularDesign { columns: Vec<usize> },

    /// A fit or loss produced a non-finite value.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Network training aborted.
    #[error("training aborted at epoch {epoch}, batch {batch}: {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    /// A requested workload exceeds the record budget.
    #[error(
        "policy sample of {requested} records exceeds the {budget} record budget; \
         reduce m_copies to at most {suggested_m}"
    )]
    Resource {
        requested: usize,
        budget: usize,
        suggested_m: usize,
    },

    /// Malformed structured text (config, edge list, panel, checkpoint).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
