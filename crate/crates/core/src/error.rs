use thiserror::Error;

/// Errors shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument out of supported range: {0}")]
    OutOfRange(String),

    #[error(
        "series did not certify after {terms} terms (partial sum {partial_sum:e}, tail bound {tail_bound:e})"
    )]
    ConvergenceFailure {
        partial_sum: f64,
        tail_bound: f64,
        terms: usize,
    },

    #[error("cross-check failed for {what}: {first:e} vs {second:e} (relative difference {rel_diff:e})")]
    CrossCheck {
        what: String,
        first: f64,
        second: f64,
        rel_diff: f64,
    },

    #[error("only {accepted} paths accepted (acceptance rate {rate:e}); raise the sample count")]
    InsufficientAcceptance { accepted: usize, rate: f64 },

    #[error("no boundary crossing before x = {horizon} (discretization artifact)")]
    NoHit { horizon: f64 },

    #[error("configuration needs {requested:e} cell updates, budget is {budget:e}")]
    ResourceGuard { requested: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
