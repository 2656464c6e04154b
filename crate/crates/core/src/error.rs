//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by scan data handling, simulation, and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("pixel ({row}, {col}) out of range for {height}x{width} grid")]
    OutOfRangePixel {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("frequency K={k} violates the quantization rule: rows/K must be an integer multiple of the shift count")]
    QuantizationViolation { k: u32 },

    #[error("phase is undefined for a zero-magnitude phasor")]
    UndefinedPhase,

    #[error("shadow pixel at ({row}, {col}): modulation magnitude too small to process")]
    ShadowPixel { row: usize, col: usize },

    #[error("need at least {needed} frequencies, got {got}")]
    TooFewFrequencies { needed: usize, got: usize },

    #[error("frequency lists do not match: {0}")]
    FrequencyMismatch(String),

    #[error("shadow mask leaves no usable pixels")]
    EmptyMask,

    #[error("stage-1 magnitude fit rejected: residual {residual:.6} exceeds threshold {threshold:.6}")]
    Stage1Rejected { residual: f64, threshold: f64 },

    #[error("sweep is all zero; nothing to fit")]
    AllZeroSweep,

    #[error("unwrap chain error: {0}")]
    UnwrapChain(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
