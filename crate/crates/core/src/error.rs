use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent sizes between two objects that must agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The intensity vanished at a scored event, so the likelihood is -inf.
    #[error("log-likelihood is -inf: zero intensity at event {index}")]
    ZeroIntensity { index: usize },

    /// An event with no background and no prior excitation cannot be attributed.
    #[error("degenerate event {index}: zero intensity, no attribution possible")]
    DegenerateEvent { index: usize },

    /// A positive attribution was placed on a zero-rate component.
    #[error("complete-data log-likelihood is -inf: positive mass on a zero rate at event {index}")]
    ZeroRateAttribution { index: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation exceeded the event cap of {cap} events (t = {time}); the process looks supercritical")]
    Runaway { cap: usize, time: f64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("counts for location `{location}` decrease at day {day}")]
    NonMonotone { location: String, day: f64 },

    #[error("model file: {0}")]
    Schema(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

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

    /// True for failures that stem from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroIntensity { .. }
                | Error::DegenerateEvent { .. }
                | Error::ZeroRateAttribution { .. }
                | Error::Numerical(_)
                | Error::Runaway { .. }
        )
    }
}
