use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal too short: {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },

    #[error("signal is not real: imaginary residue {residue:e}")]
    ComplexSignal { residue: f64 },

    #[error("inconsistent frequencies: imaginary residue {residue:e} for gamma {gamma:e}")]
    InconsistentFrequencies { gamma: f64, residue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("search did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
