use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the statistics pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("zenith angle {0} deg outside [0, 180]")]
    ZenithOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("linear power must be > 0 to convert to dB, got {0}")]
    NonPositivePower(f64),

    #[error("duplicate measurement for direction az={azimuth_deg} deg, zenith={zenith_deg} deg")]
    DuplicateDirection { azimuth_deg: f64, zenith_deg: f64 },

    #[error("records mix {what}: {first} vs {second}")]
    MixedRecords {
        what: &'static str,
        first: String,
        second: String,
    },

    #[error("no power above the noise floor")]
    NoPresentPower,

    #[error("degenerate angular spread: mean resultant length {resultant:e} is below the floor")]
    DegenerateSpread { resultant: f64 },

    #[error("frequency {0} GHz outside the model validity range [0.5, 100] GHz")]
    FrequencyOutOfRange(f64),

    #[error("no model entry for {metric} {condition}")]
    MissingModelEntry { metric: String, condition: String },

    #[error("mismatched comparison: {0}")]
    Mismatch(String),

    #[error("target angular spread {target_deg} deg unreachable: {reason}")]
    UnreachableTarget { target_deg: f64, reason: String },

    #[error("link {link}: {source}")]
    Link {
        link: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}, column `{column}`: {message}")]
    Parse {
        path: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: schema error: {message}")]
    Schema { path: String, message: String },

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
}

impl Error {
    pub(crate) fn for_link(self, link: &str) -> Self {
        match self {
            e @ Error::Link { .. } => e,
            other => Error::Link {
                link: link.to_string(),
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
