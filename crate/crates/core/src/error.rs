//! Crate-wide error type.
//!
//! Variants carry enough context (row/column coordinates, offending values)
//! for the CLI to print actionable messages and map failures onto its exit
//! codes: data/validation problems versus numerical failures.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input table has a row whose cell count differs from the header.
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    /// A cell failed to parse as a finite number.
    #[error("non-numeric cell at row {row}, column {col}: {text:?}")]
    NonNumericCell { row: usize, col: usize, text: String },

    /// Expression values must be non-negative at ingestion.
    #[error("negative value {value} at row {row}, column {col}")]
    NegativeValue { row: usize, col: usize, value: f64 },

    /// A value is NaN or infinite.
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize, value: f64 },

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown stage code {code:?}")]
    UnknownStage { code: String },

    #[error("sample {id:?} has no label")]
    MissingLabel { id: String },

    #[error("test fraction {0} outside (0, 1)")]
    InvalidFraction(f64),

    /// Split or fold construction would leave a side or class empty.
    #[error("stratification impossible: {0}")]
    StratificationImpossible(String),

    #[error("split leaves a side empty: {test} test samples of {n}")]
    EmptySplit { test: usize, n: usize },

    #[error("group too small: {context} requires at least {required} samples, found {found}")]
    GroupTooSmall {
        context: &'static str,
        required: usize,
        found: usize,
    },

    #[error("input contains a single class; {0} requires both")]
    SingleClass(&'static str),

    #[error("empty selection: no features passed the threshold")]
    EmptySelection,

    #[error("feature index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// Prediction-time input has a different feature count than fit-time.
    #[error("feature count mismatch: model fitted on {expected}, input has {found}")]
    FeatureCountMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("n_components {requested} out of range (max {max})")]
    ComponentsOutOfRange { requested: usize, max: usize },

    /// Whitening hit a covariance eigenvalue below the rank threshold.
    #[error("rank-deficient whitening: eigenvalue {eigenvalue:.3e} for component {component}")]
    RankDeficient { component: usize, eigenvalue: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid fold count k={k} for n={n}")]
    InvalidFolds { k: usize, n: usize },

    #[error("empty grid")]
    EmptyGrid,

    /// A fit-type stage was asked to score data it was trained on.
    #[error("leakage: evaluation set shares {overlap} sample(s) with the fitted training data")]
    Leakage { overlap: usize },

    #[error("run {run} failed: {source}")]
    TrialFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    /// Non-recoverable numerical failure (NaN loss, fatal non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("nothing to report: {0}")]
    EmptyResults(&'static str),

    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of numerical procedures rather than of input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
            || matches!(self, Error::TrialFailed { source, .. } if source.is_numerical())
    }
}
