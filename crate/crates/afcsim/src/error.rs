//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain type or operation input violated one of its invariants.
    /// `field` is a dotted path naming the offending quantity.
    #[error("invalid {field}: {message}")]
    InvalidInput { field: String, message: String },

    /// Time step exceeds the integrator stability bound.
    #[error("time step {dt_s} s exceeds stability bound {bound_s} s (fastest scale {scale_hz} Hz)")]
    StepTooLarge {
        dt_s: f64,
        bound_s: f64,
        scale_hz: f64,
    },

    /// A requested time lies outside a sampled grid.
    #[error("time {t_s} s outside grid [{start_s}, {end_s}] s")]
    OutsideGrid { t_s: f64, start_s: f64, end_s: f64 },

    /// Pulse/field grids passed to a propagation routine do not line up.
    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    /// No echo found above the detection floor in the search window.
    #[error("no echo above floor {floor} in window [{start_s}, {end_s}] s")]
    NoEcho {
        floor: f64,
        start_s: f64,
        end_s: f64,
    },

    /// Scenario document failed to parse.
    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
