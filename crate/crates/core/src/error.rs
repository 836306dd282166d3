use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        value: f64,
        error: f64,
        intervals: usize,
    },

    #[error("no sign change of the bracketed function on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("root finder stalled after {iterations} iterations")]
    RootIterations { iterations: usize },

    #[error("degenerate spheroid: {0}")]
    Degenerate(String),

    #[error("{what}: routes disagree ({first:e} vs {second:e})")]
    Inconsistent {
        what: &'static str,
        first: f64,
        second: f64,
    },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Bracket { .. }
                | Error::RootIterations { .. }
                | Error::Inconsistent { .. }
        )
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
