use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence directory not found: {0}")]
    MissingDirectory(PathBuf),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("failed to read image {path}: {source}")]
    UnreadableImage {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {frames} frames but annotation for frame {line} is missing")]
    CountMismatch {
        path: PathBuf,
        frames: usize,
        annotations: usize,
        line: usize,
    },

    #[error("{path}:{line}: malformed annotation {text:?}")]
    MalformedAnnotation {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("{path}:{line}: box extent must be positive (w={w}, h={h})")]
    NonPositiveExtent {
        path: PathBuf,
        line: usize,
        w: f64,
        h: f64,
    },

    #[error("sequence needs at least 2 frames, found {0}")]
    TooFewFrames(usize),

    #[error("synthetic target leaves the canvas at frame {frame}")]
    PathExitsCanvas { frame: usize },

    #[error("synthetic distractor {index} overlaps the target (IoU {iou:.3}) at frame {frame}")]
    DistractorOverlap { index: usize, frame: usize, iou: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown feature channel {0:?}")]
    UnknownChannel(String),

    #[error("color-name lookup table {path}: {reason}")]
    LookupTable { path: PathBuf, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("context patch coincides with the target center")]
    CoincidentCenters,

    #[error("degenerate target box {w}x{h}: each side must be at least {min} pixels")]
    DegenerateBox { w: f64, h: f64, min: f64 },

    #[error("empty result set")]
    EmptyResults,

    #[error("config {origin}:{line}: {reason}")]
    Config {
        origin: String,
        line: usize,
        reason: String,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    /// Broad category, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::DimensionMismatch { .. } | Error::CoincidentCenters => {
                ErrorKind::Numeric
            }
            Error::InvalidParameter(_) | Error::UnknownChannel(_) | Error::Config { .. } => {
                ErrorKind::Usage
            }
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
