use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sample size {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },

    #[error("all coalescence times are equal; the estimator is undefined")]
    DegenerateTimes,

    #[error("coalescence times are on a relative axis; absolute times are required")]
    RelativeAxis,

    #[error("newick parse error at byte {offset}: expected {expected}")]
    Parse { offset: usize, expected: String },

    #[error("branch above node {node} has no length")]
    MissingBranchLength { node: String },

    #[error("tree is not ultrametric (worst relative tip-depth deviation {worst_deviation:.3e})")]
    NotUltrametric { worst_deviation: f64 },

    #[error("node {node} has {children} children; a binary tree is required")]
    NotBinary { node: String, children: usize },

    #[error("{got} replicates is below the minimum of {need}")]
    InsufficientReplicates { got: usize, need: usize },

    #[error("sample size mismatch: expected n = {expected}, got n = {got}")]
    MismatchedN { expected: usize, got: usize },

    #[error("no calibration constants available for n = {n}")]
    MissingConstants { n: usize },

    #[error(
        "maximum-likelihood fit did not converge (gradient norm {grad_norm:.3e}; \
         best iterate a = {location}, b = {scale})"
    )]
    NonConvergence {
        grad_norm: f64,
        location: f64,
        scale: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers themselves rather than by
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DegenerateTimes | Error::NonConvergence { .. })
    }
}
