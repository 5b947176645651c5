use thiserror::Error;

use crate::au::{EmotionClass, SourceTag};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("intensity is not finite: {0}")]
    NonFiniteIntensity(f64),
    #[error("scale maximum must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("invalid AU vector: {0}")]
    InvalidAuVector(String),
    #[error("empty emotion label")]
    EmptyLabel,
    #[error("unknown emotion label {0:?}")]
    UnknownLabel(String),
    #[error("invalid label map: {0}")]
    InvalidLabelMap(String),
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("missing column for AU{0}")]
    MissingColumn(u8),
    #[error("missing required column {0:?}")]
    MissingNamedColumn(String),
    #[error("duplicate frame {frame} in clip {clip:?}")]
    DuplicateFrame { clip: String, frame: usize },
    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: u64,
        column: String,
        message: String,
    },
    #[error("invalid AU series {clip:?}: {reason}")]
    InvalidSeries { clip: String, reason: String },
    #[error("invalid annotation {clip:?}: {reason}")]
    InvalidAnnotation { clip: String, reason: String },
    #[error("clip {0:?}: annotated frame index not covered by its AU series")]
    FrameCoverage(String),
    #[error("duplicate identity {0:?}")]
    DuplicateIdentity(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("apex window is empty for a clip of {0} frames")]
    WindowEmpty(usize),
    #[error("invalid expert table: {0}")]
    InvalidExpertTable(String),
    #[error("requested {requested} MiE triplets for class {class} but only {available} clips are annotated")]
    InsufficientMiEClips {
        class: EmotionClass,
        requested: usize,
        available: usize,
    },
    #[error("no macro-expression clips available for class {0}")]
    NoMaEClips(EmotionClass),

    #[error("frame count must be at least 2, got {0}")]
    InvalidFrameCount(usize),
    #[error("identity pool is empty")]
    EmptyIdentityPool,
    #[error("requested {requested} identities but the pool holds {available}")]
    InsufficientIdentities { requested: usize, available: usize },
    #[error("triplet pool has no entries for class {class}, source {tag}")]
    MissingTripletClass { class: EmotionClass, tag: SourceTag },

    #[error("cannot split {subjects} subjects into {k} folds")]
    TooFewSubjects { k: usize, subjects: usize },
    #[error("duplicate subject {0:?}")]
    DuplicateSubject(String),
    #[error("length mismatch: {pred} predictions vs {truth} labels")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("p-value {0} outside (0, 1]")]
    InvalidPValue(f64),
    #[error("no training samples for class {0}")]
    MissingClass(EmotionClass),
    #[error("unknown sample id {0:?}")]
    UnknownSampleId(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),

    #[error("malformed artifact: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the underlying reader or writer, as opposed to
    /// content that failed validation.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            Error::Io(err.into())
        } else {
            Error::Format(err.to_string())
        }
    }
}

pub(crate) fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            row,
            column: String::new(),
            message: format!("{kind:?}"),
        },
    }
}
