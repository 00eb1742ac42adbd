use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("unknown parking lot `{0}`")]
    UnknownLot(String),

    #[error("no route from `{from}` to `{to}`")]
    Unreachable { from: String, to: String },

    #[error("invalid policy `{policy}`: {reason}")]
    InvalidPolicy { policy: String, reason: String },

    #[error("absolute continuity violated at link `{given}`: mass on `{neighbor}` where the reference row is zero")]
    AbsoluteContinuity { given: String, neighbor: String },

    #[error("invalid plan request: {0}")]
    InvalidRequest(String),

    #[error("brute-force enumeration of {count} candidates exceeds the guard of {limit}")]
    GuardExceeded { count: f64, limit: u64 },

    #[error("invalid reward input: {0}")]
    InvalidReward(String),

    #[error("feed error: {0}")]
    Feed(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("simulation invariant violated: {0}")]
    Invariant(String),

    #[error("malformed trace log: {0}")]
    MalformedLog(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("invalid benchmark configuration: {0}")]
    InvalidBench(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
