use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pricing, quantisation and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate factor mix: (1-theta)^2 + theta^2 + 2 rho theta (1-theta) = {0} <= 0")]
    DegenerateMix(f64),

    #[error("maturity {maturity} is not covered by the forward variance curve")]
    Coverage { maturity: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("integration tolerance not reached: estimate {estimate}, error bound {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("degenerate bivariate density: |rho12| = {0} must be < 1")]
    DegenerateDensity(f64),

    #[error("price {price} is {side} the no-arbitrage bound {bound}")]
    NoSolution {
        price: f64,
        bound: f64,
        side: &'static str,
    },

    #[error("underdetermined parity fit: {0} distinct paired strikes, need at least 2")]
    Underdetermined(usize),

    #[error("probabilities sum to {0}, expected 1")]
    Normalisation(f64),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
