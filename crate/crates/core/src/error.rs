use thiserror::Error;

/// Errors raised by the library.
///
/// Iteration failures (divergence, exhausted budget, degenerate Jacobians
/// met mid-run) are not errors: they are reported through
/// [`Status`](crate::Status) on the solver result. This type covers
/// precondition violations and factorization failures on direct calls.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A pivot of the UDL factorization (or a diagonal divisor) vanished.
    #[error("singular decomposition: pivot {index} is {pivot:e}")]
    Singular { index: usize, pivot: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("unknown problem `{name}` (valid: {})", valid.join(", "))]
    UnknownProblem {
        name: String,
        valid: Vec<&'static str>,
    },

    #[error("unknown method `{0}` (valid: nr, dn, w4-udl, w4-eigen, dn-eigen)")]
    UnknownMethod(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
