use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rig: {0}")]
    InvalidRig(String),

    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("degenerate basis: |sin(angle difference)| = {sine:.3e} is below {tolerance:.1e}")]
    DegenerateBasis { sine: f64, tolerance: f64 },

    #[error("rig not metric: {0}")]
    RigNotMetric(&'static str),

    #[error("scaled-distance null space is not one-dimensional")]
    Degenerate,

    #[error("all radius ratios are equal; at least two pairs with different radii are required")]
    EqualRadii,

    #[error("depth radicand is negative for every light")]
    NegativeRadicand,

    #[error("light-direction matrix has rank {0} < 3")]
    RankDeficient(usize),

    #[error("pixel lies on the principal point; the x/y ratio is undefined")]
    PrincipalPointDegenerate,

    #[error("unsupported arrangement: {0}")]
    UnsupportedArrangement(String),

    #[error("degenerate depth fit: estimate is constant over the mask")]
    DegenerateFit,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid PFM data: {0}")]
    Pfm(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
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
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
