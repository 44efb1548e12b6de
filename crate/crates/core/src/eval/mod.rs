//! Model evaluation: confusion matrices, weighted metrics, fold
//! generation, and grid search.

pub mod grid;
pub mod kfold;
pub mod metrics;

pub use grid::{default_grid, grid_search, CandidateResult, GridSearchOutcome, GridSpec};
pub use kfold::{kfold, stratified_kfold, Fold};
pub use metrics::{metrics, round2, ClassMetrics, ConfusionMatrix, MetricReport};
