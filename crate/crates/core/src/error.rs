use thiserror::Error;

/// Errors produced by configuration, analysis, control and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unstable operating point: mu({power}) = {rate} must exceed total work rate {load}")]
    Unstable { power: f64, rate: f64, load: f64 },

    #[error("no data: {0}")]
    NoData(&'static str),

    #[error("invalid priority order: {0}")]
    InvalidOrder(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("{what} supports at most {limit} classes, got {classes}")]
    TooManyClasses {
        what: &'static str,
        limit: usize,
        classes: usize,
    },

    #[error("infeasible delay bounds: class set {classes:?} needs sum rho*W >= {required}, bounds allow {allowed}")]
    InfeasibleBounds {
        /// One-based class indices of a violated subset constraint.
        classes: Vec<usize>,
        required: f64,
        allowed: f64,
    },

    #[error("infeasible power budget: {0}")]
    InfeasiblePower(String),

    #[error("data integrity violation: {0}")]
    DataIntegrity(String),

    #[error("frame {frame} exceeded the event cap of {cap} events")]
    Divergence { frame: u64, cap: u64 },

    #[error("scenario point {point} failed: {source}")]
    Scenario {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
