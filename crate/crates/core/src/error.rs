use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty policy: total download is zero")]
    EmptyPolicy,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported number of messages M = {0}; only M = 2 and M = 3 are supported")]
    UnsupportedMessages(usize),

    #[error("traffic ratio vector must be sorted non-increasing")]
    UnsortedTraffic,

    #[error("minimum rate r_min = {r_min} outside [{lower}, {upper}] (upper bound is C_PIR)")]
    RateOutOfRange {
        r_min: String,
        lower: String,
        upper: String,
    },

    #[error("{what} too large: {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("target allocation lies outside the convex hull of the corner points")]
    OutsideHull,

    #[error("stationary point t*(D) is not a positive real ({0})")]
    NonRealStationaryPoint(String),

    #[error("single-server fallback requires r_min = 1/3, got {0}")]
    FallbackInfeasible(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("allocation entry {0} is not an integer number of bits")]
    FractionalAllocation(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
