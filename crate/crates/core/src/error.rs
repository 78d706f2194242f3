use thiserror::Error;

use crate::model::BlowupReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The inverse substitution left the finite reals.
    #[error("path overflow: {} flagged indices, max |value| = {:e}", .0.flagged_indices.len(), .0.max_abs)]
    Overflow(BlowupReport),

    #[error("profile evaluated at its pole t* = {pole}")]
    Singularity { pole: f64 },

    #[error("blowup budget exceeded: {rejected} rejected draws > {budget} allowed for {n_samples} samples")]
    BlowupBudget {
        rejected: usize,
        budget: usize,
        n_samples: usize,
    },

    #[error("proposal tuning failed: {0}")]
    Tuning(String),

    #[error("shooting did not converge: {0}")]
    Convergence(String),

    #[error("degenerate comparison: zero error bars with means {0} and {1}")]
    DegenerateComparison(f64, f64),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
