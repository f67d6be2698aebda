use crate::trace::IterateTrace;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An oracle or an update produced NaN/Inf. `step` is the iteration (or
    /// inner ascent step) at which the quantity went bad.
    #[error("non-finite {quantity} at step {step}")]
    NonFinite { quantity: String, step: usize },

    /// A solve aborted mid-run; the trace recorded so far is preserved so
    /// callers can flush it before reporting the failure.
    #[error("solve aborted at iteration {k}: non-finite {quantity}")]
    Aborted {
        quantity: String,
        k: usize,
        partial: Box<IterateTrace>,
    },

    #[error("dimension mismatch for {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule index {k} out of range for horizon {horizon}")]
    ScheduleIndex { k: usize, horizon: usize },

    #[error("dataset error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Dataset { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn non_finite(quantity: impl Into<String>, step: usize) -> Self {
        Error::NonFinite {
            quantity: quantity.into(),
            step,
        }
    }
}
