use std::path::PathBuf;

use thiserror::Error;

use crate::dynsys::PhasePoint;

/// Errors raised by the density-evolution laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical overflow while integrating at t = {t}")]
    NumericalOverflow { t: f64 },

    #[error("preimage undefined at backward step {step} (point {point})")]
    PreimageUndefined { step: usize, point: PhasePoint },

    #[error("system has no time-reversal involution")]
    MissingReversal,

    #[error("integration needs {requested} substeps, limit is {max}")]
    TooManySubsteps { requested: u64, max: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density is not positive at node {node} (value {value})")]
    NonPositiveDensity { node: usize, value: f64 },

    #[error("linear fit needs at least two distinct times")]
    DegenerateTimes,

    #[error("time series is empty")]
    EmptySeries,

    #[error("omega = {0} is the degenerate case |omega| = 1")]
    DegenerateOmega(f64),

    #[error("discrete-time evaluation needs a non-negative integer time, got {0}")]
    NonIntegerTime(f64),

    #[error("horizon {horizon} exceeds the stored orbit history (burn-in {burn_in})")]
    HorizonExceedsHistory { horizon: usize, burn_in: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("evaluation failed at t = {time}, x = {point}: {source}")]
    AtPoint {
        time: f64,
        point: PhasePoint,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed at support point {point}: {source}")]
    AtSupportPoint {
        point: PhasePoint,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at(self, time: f64, point: PhasePoint) -> Self {
        match self {
            // already located
            e @ (Error::AtPoint { .. } | Error::AtSupportPoint { .. }) => e,
            e => Error::AtPoint {
                time,
                point,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
