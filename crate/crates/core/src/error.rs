use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("stroke id out of range [1, 32] at line {0}")]
    StrokeIdOutOfRange(usize),
    #[error("duplicate codepoint at line {0}")]
    DuplicateCodepoint(usize),
    #[error("character {0:?} (U+{cp:04X}) not in stroke table", cp = *.0 as u32)]
    UnknownCharacter(char),
    #[error("invalid stroke encoding: {0}")]
    InvalidEncoding(String),

    #[error("font cannot be rendered: {0}")]
    UnrenderableFont(String),
    #[error("no glyphs could be rendered")]
    EmptyGlyphSet,
    #[error("need at least {min} characters, got {got}")]
    TooFewCharacters { min: usize, got: usize },
    #[error("structural character set unavailable: {0}")]
    StructuralSetUnavailable(String),
    #[error("paired percentage {0} outside [0, 1]")]
    PercentOutOfRange(f64),
    #[error("empty dataset")]
    EmptyDataset,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("value outside (0, 1): {0}")]
    DomainError(f64),
    #[error("non-finite loss term {term}: {value}")]
    NonFiniteLoss { term: &'static str, value: f64 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("image side {got} is smaller than the {window}-pixel window")]
    ImageTooSmall { got: usize, window: usize },
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("no paired test data")]
    NoPairedTestData,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_mismatch(expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Error {
    Error::ShapeMismatch {
        expected: format!("{expected:?}"),
        got: format!("{got:?}"),
    }
}
