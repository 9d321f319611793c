use thiserror::Error;

use crate::Label;

/// Errors raised by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index subset or label does not fit the object it is applied to.
    #[error("index error: {0}")]
    Index(String),

    /// Tensor shapes or dimensions disagree.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A value violates the invariants of its type.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inputs are individually valid but cannot be combined as requested.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A supplied marginal disagrees with the measure it should describe.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// The requested case is not covered by a constructive procedure.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A user-supplied functional produced an unusable value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A family rule returned different values for the same subset.
    #[error("rule is not deterministic on subset {0:?}")]
    NonDeterministicRule(Vec<Label>),

    /// Decomposition order does not align with the image of the grid.
    #[error("order {requested} is incompatible with the CDF image of the grid; largest compatible order is {largest_compatible}")]
    IncompatibleOrder {
        requested: usize,
        largest_compatible: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
