use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed PLY header at line {line}: {message}")]
    PlyHeader {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: unknown property `{property}` on element vertex")]
    UnknownProperty { path: PathBuf, property: String },

    #[error("{path}: missing property {property}")]
    MissingProperty { path: PathBuf, property: String },

    #[error("{path}: row {row}: {message}")]
    PlyData {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: non-finite value in `{field}` at row {row}")]
    NonFinite {
        path: PathBuf,
        field: String,
        row: usize,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: schema violation at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{path}: invalid CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("annotations are required for {0}")]
    AnnotationsMissing(&'static str),

    #[error("background mask is empty")]
    EmptyBackground,

    #[error("class id {0} is not present in the label table")]
    UnknownClass(i32),

    #[error("empty index subset")]
    EmptySubset,

    #[error("rotation axis has zero length")]
    ZeroAxis,

    #[error("scene id mismatch: detections for `{detections}` vs ground truth for `{ground_truth}`")]
    SceneMismatch {
        detections: String,
        ground_truth: String,
    },

    #[error("method `{method}` has no mAP for {corruption} level {level}")]
    MissingLevel {
        method: String,
        corruption: String,
        level: u8,
    },

    #[error("method `{0}` is not present in the mAP grid")]
    MissingMethod(String),

    #[error("baseline has perfect mAP at every level of {0}; corruption error is undefined")]
    ZeroDenominator(String),

    #[error("corruption set is empty")]
    EmptyCorruptionSet,

    #[error("report is not self-consistent: {0}")]
    Inconsistent(String),

    #[error("scene `{scene_id}` failed validation: {violations}")]
    InvalidScene {
        scene_id: String,
        violations: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by content that does not satisfy a format or
    /// invariant, as opposed to IO or configuration problems.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::PlyHeader { .. }
                | Error::UnknownProperty { .. }
                | Error::MissingProperty { .. }
                | Error::PlyData { .. }
                | Error::NonFinite { .. }
                | Error::Json { .. }
                | Error::Schema { .. }
                | Error::Csv { .. }
                | Error::InvalidScene { .. }
                | Error::SceneMismatch { .. }
                | Error::Inconsistent(_)
        )
    }
}
