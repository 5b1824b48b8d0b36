use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed JSON: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("record {0}: neither label nor exec_results present")]
    MissingLabel(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("score method {method} is not applicable: {reason}")]
    MethodNotApplicable { method: &'static str, reason: String },

    #[error("token {position} has zero probability")]
    ZeroProbability { position: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("only one class present in labels")]
    SingleClass,

    #[error(
        "newton solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})"
    )]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value {value} outside [0, 1]")]
    OutOfUnitInterval { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sql lex error at byte {position}: {message}")]
    Lex { position: usize, message: String },

    #[error("fit and evaluation sets share {0} ids")]
    LeakedIds(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
