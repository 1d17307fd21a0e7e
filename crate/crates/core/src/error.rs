use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input file not found: {0}")]
    MissingInput(PathBuf),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header is missing column `{0}` required by the schema")]
    MissingColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: missing value for `{feature}`")]
    MissingValue { row: usize, feature: String },

    #[error("row {row}: value `{value}` is not a declared category of `{feature}`")]
    UnknownCategory {
        row: usize,
        feature: String,
        value: String,
    },

    #[error("row {row}: cannot parse `{value}` as a number for `{feature}`")]
    NotNumeric {
        row: usize,
        feature: String,
        value: String,
    },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("no discretization bin of `{feature}` covers value `{value}`")]
    Uncovered { feature: String, value: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("input has {found} columns, model expects {expected}")]
    Arity { expected: usize, found: usize },

    #[error("group `{group}` has no {what}")]
    EmptyGroup { group: String, what: &'static str },

    #[error("linear system is singular")]
    Singular,

    #[error("{features} features exceed the exact Shapley limit of {limit}")]
    TooManyFeatures { features: usize, limit: usize },

    #[error("instance is already predicted as the target class")]
    AlreadyTarget,

    #[error("no valid counterfactual found within the search budget")]
    NoCounterfactual,

    #[error("degenerate contingency table: {0}")]
    Degenerate(String),

    #[error("instance index {index} out of range (0..{len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid snapshot: {0}")]
    Snapshot(String),

    #[error("{0}")]
    Invalid(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
