use thiserror::Error;

pub type Result<T> = std::result::Result<T, StafError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StafError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A value left the representable range (overflowing exponential,
    /// rank-deficient pseudoinverse, non-finite state).
    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("simulation aborted at t = {time}: {source}")]
    Diverged {
        time: f64,
        #[source]
        source: Box<StafError>,
    },
}

impl StafError {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        StafError::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
