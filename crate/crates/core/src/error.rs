use crate::expr::{EvalError, ParseError, StatePoint};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    /// A pointwise linear system or frame degenerated at `point`.
    #[error("singular {what} at {point:?} (measure {measure:e})")]
    Singular {
        what: String,
        point: Vec<f64>,
        measure: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("postcondition violated: {0}")]
    Postcondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("integration stopped at t = {t}: {source}")]
    Integration {
        t: f64,
        last_good: StatePoint,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
