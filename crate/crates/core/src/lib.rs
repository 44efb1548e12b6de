//! Expression-matrix tumor-stage classification pipeline.
//!
//! The crate ingests a sample-by-gene expression matrix (TPM units) with
//! binary stage labels and runs a configurable analysis pipeline:
//! differential expression, false-positive-rate feature selection, PCA/ICA
//! feature extraction, SMOTE and noise augmentation, eight classifiers with
//! grid-search cross-validation, and weighted-metric reporting.
//!
//! All numerics (t/F p-values, eigendecomposition, FastICA, SMO, boosting,
//! backprop) are implemented in this crate and checked against small-instance
//! oracles in the test suite.

pub mod augment;
pub mod classifiers;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod select;
pub mod special;
pub mod stats;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
