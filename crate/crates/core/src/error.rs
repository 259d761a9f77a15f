use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analytic modules and the virtual lab.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The conditioning event has (numerically) zero probability.
    #[error("conditioning impossible: event probability {probability:e} is below {threshold:e}")]
    ConditioningImpossible { probability: f64, threshold: f64 },

    /// A statistic is undefined for the given distribution (e.g. Fano factor at zero mean).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("degenerate detector: {0}")]
    DegenerateDetector(String),

    #[error("degenerate covariance matrix: {0}")]
    DegenerateCovariance(String),

    /// No shot satisfied the requested condition.
    #[error("empty selection: no shot satisfies {0}")]
    EmptySelection(String),

    /// The calibration score does not vary over the search interval.
    #[error("flat calibration score over [{lo}, {hi}]: voltages carry no comb structure")]
    FlatScore { lo: f64, hi: f64 },

    /// A detector was asked to report more photons than its linear range allows.
    #[error("detector {arm} saturated: {count} detected photons exceeds the linear range of {limit}")]
    Saturation { arm: &'static str, count: u32, limit: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A malformed input file; `location` names the line or byte offset.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Probability below which a conditioning event is treated as impossible.
pub const CONDITIONING_THRESHOLD: f64 = 1e-15;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

pub(crate) fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::domain(format!("{name} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_condition(probability: f64) -> Result<()> {
    if !(probability >= CONDITIONING_THRESHOLD) {
        return Err(Error::ConditioningImpossible {
            probability,
            threshold: CONDITIONING_THRESHOLD,
        });
    }
    Ok(())
}
