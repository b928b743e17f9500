use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, data, calibration, pricing and hedging layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("valuation time {t} lies after maturity {maturity}")]
    TimeAfterMaturity { t: f64, maturity: f64 },

    #[error("valuation time {t} must lie strictly before maturity {maturity}")]
    AtOrAfterMaturity { t: f64, maturity: f64 },

    #[error("loading degree must be non-negative, got {0}")]
    NegativeLoading(f64),

    #[error("observed loading price {observed} is below the minimal price {minimal}")]
    BelowMinimalPrice { observed: f64, minimal: f64 },

    #[error("minimal price {minimal} exceeds risk-neutral price {risk_neutral}")]
    MinimalAboveRiskNeutral { minimal: f64, risk_neutral: f64 },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: date {date} does not strictly follow the previous row")]
    NonIncreasingDate { row: usize, date: String },

    #[error("row {row}: index level must be positive, got {value}")]
    NonPositiveIndex { row: usize, value: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("quadratic variation curve is identically zero")]
    DegenerateCurve,

    #[error("time grid is invalid: {0}")]
    InvalidGrid(String),

    #[error("time grid ends at {end} which lies beyond maturity {maturity}")]
    GridPastMaturity { end: f64, maturity: f64 },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
