use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // array / mask file formats
    #[error("bad NPY magic sequence")]
    BadMagic,
    #[error("unsupported NPY dtype `{0}`")]
    UnsupportedDtype(String),
    #[error("fortran-ordered arrays are not supported")]
    UnsupportedOrder,
    #[error("truncated payload: header declares {expected} bytes, {available} available")]
    TruncatedPayload { expected: usize, available: usize },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("non-finite value at flat index {0}")]
    NonFiniteValue(usize),
    #[error("array shape {shape:?} does not fit {expected}")]
    BadShape { shape: Vec<usize>, expected: &'static str },

    #[error("invalid fold {0}; expected 0..=3")]
    BadFold(u32),
    #[error("invalid value: {0}")]
    InvalidValue(String),

    // classification
    #[error("feature dimension {features} does not match anchor dimension {anchors}")]
    DimMismatch { features: usize, anchors: usize },
    #[error("anchor row {0} has zero norm")]
    ZeroAnchor(usize),
    #[error("ground-truth label {label} at pixel {pixel} is not a seen class")]
    LabelOutOfFold { label: u32, pixel: usize },
    #[error("class {class} is outside the {classes} logit channels")]
    ClassOutOfRange { class: u32, classes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input too small: {0}")]
    TooSmall(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    // spectral
    #[error("graph with {n} nodes needs at least {needed}")]
    TooFewPixels { n: usize, needed: usize },
    #[error("graph with {n} nodes exceeds the dense limit {limit}; downsample the feature grid")]
    GraphTooLarge { n: usize, limit: usize },
    #[error("affinity sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("lanczos did not converge: {converged} of {wanted} pairs after {restarts} restarts")]
    NoConvergence {
        converged: usize,
        wanted: usize,
        restarts: usize,
    },

    // analytics
    #[error("mask is empty")]
    EmptyMask,
    #[error("need at least two anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("prediction and ground-truth streams differ: {0}")]
    StreamMismatch(String),

    // batch front end
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("stage `{stage}` needs {missing}")]
    StageDependency { stage: &'static str, missing: String },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable identifier for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoFailure",
            Error::BadMagic => "BadMagic",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::UnsupportedOrder => "UnsupportedOrder",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::BadHeader(_) => "BadHeader",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::BadShape { .. } => "BadShape",
            Error::BadFold(_) => "BadFold",
            Error::InvalidValue(_) => "InvalidValue",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::ZeroAnchor(_) => "ZeroAnchor",
            Error::LabelOutOfFold { .. } => "LabelOutOfFold",
            Error::ClassOutOfRange { .. } => "ClassOutOfRange",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::TooSmall(_) => "TooSmall",
            Error::NonFinite(_) => "NonFinite",
            Error::TooFewPixels { .. } => "TooFewPixels",
            Error::GraphTooLarge { .. } => "GraphTooLarge",
            Error::SizeMismatch(..) => "SizeMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::EmptyMask => "EmptyMask",
            Error::TooFewAnchors(_) => "TooFewAnchors",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::StreamMismatch(_) => "StreamMismatch",
            Error::Manifest(_) => "ManifestError",
            Error::StageDependency { .. } => "StageDependencyError",
            Error::Config(_) => "ConfigError",
        }
    }
}
