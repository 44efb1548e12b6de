//! Random forest: bagged trees with per-split feature subsampling.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Criterion, GrowOpts, SplitIndex, TreeNodes};
use crate::data::StageLabel;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Feature-subset size tried at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// floor(sqrt(p)), never below 1.
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub(crate) fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(m) => m.min(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RFParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for RFParams {
    fn default() -> Self {
        RFParams {
            n_estimators: 100,
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl RFParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParameter {
                name: "n_estimators".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter {
                name: "min_samples_split".into(),
                reason: "must be at least 2".into(),
            });
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter {
                name: "min_samples_leaf".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::InvalidParameter {
                name: "max_features".into(),
                reason: "count must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: RFParams,
    pub trees: Vec<TreeNodes>,
    pub n_features: usize,
    pub seed: u64,
}

impl ForestModel {
    /// Majority vote over trees; an exact tie goes to `Early`.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows()
            .into_iter()
            .map(|row| {
                let late = self.late_votes(row);
                if 2 * late > self.trees.len() {
                    StageLabel::Late
                } else {
                    StageLabel::Early
                }
            })
            .collect()
    }

    /// Fraction of trees voting `Late`.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| self.late_votes(row) as f64 / self.trees.len() as f64)
            .collect()
    }

    fn late_votes(&self, row: ndarray::ArrayView1<f64>) -> usize {
        self.trees.iter().filter(|t| t.predict_row(row) == StageLabel::Late).count()
    }
}

/// Each tree draws its bootstrap sample and split subsets from an
/// independent stream keyed by the tree index, so the forest is reproducible
/// regardless of build parallelism.
pub(crate) fn fit_forest(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &RFParams,
    seed: u64,
) -> ForestModel {
    let n = x.nrows();
    let p = x.ncols();
    let opts = GrowOpts {
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features.resolve(p),
    };
    let bootstrap = params.bootstrap;
    let si = SplitIndex::build(x);
    let trees: Vec<TreeNodes> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng_from(rng::derive_indexed(seed, stream::TREE, t as u64));
            let indices: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, indices, &opts, &mut rng, &si)
        })
        .collect();
    ForestModel { params: params.clone(), trees, n_features: p, seed }
}
