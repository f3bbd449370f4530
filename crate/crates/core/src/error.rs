use std::path::PathBuf;

use crate::lattice::Site;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid transition vector: {0}")]
    InvalidTransitionVector(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("site {site} lies outside the realized Gibbs window")]
    WindowExceeded { site: Site },

    #[error("site {site} is not covered by the explicit environment table")]
    SiteUndefined { site: Site },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("volume of {size} sites exceeds the dense-solve cap of {cap}")]
    VolumeTooLarge { size: usize, cap: usize },

    #[error("linear system is singular (pivot {pivot} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("operation requires a one-dimensional model, got d = {0}")]
    NotOneDimensional(usize),

    #[error("path does not end at the origin; recentre it before computing Z_k")]
    NotRecentred,

    #[error("missing mixing constants: {0}")]
    MissingConstants(String),

    #[error("truncation did not converge: last gap {gap:e} after window {window}")]
    TruncationFailed { gap: f64, window: i64 },

    #[error("{what} would enumerate {size} configurations, cap is {cap}")]
    EnumerationCap { what: &'static str, size: u128, cap: u128 },

    #[error("denominator estimate {mean:e} is indistinguishable from zero (std err {std_err:e})")]
    DegenerateDenominator { mean: f64, std_err: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("mismatched supports: {left} vs {right} outcomes")]
    MismatchedSupports { left: usize, right: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("artifact version mismatch: manifest has {recorded}, running {running}")]
    VersionMismatch { recorded: String, running: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}
