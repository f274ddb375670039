use thiserror::Error;

/// Errors raised by the estimation and selection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The simplex solver hit its iteration cap. Carries the best iterate.
    #[error(
        "weight fit did not converge after {iterations} iterations \
         (objective {best_objective:e}, stationarity residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        best_objective: f64,
        best_weights: Vec<f64>,
    },

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, got })
    }
}
