//! Binary stage classifiers behind a single spec/fit/predict surface.
//!
//! Every kind trains from an `(samples x features, labels, seed)` triple and
//! produces an immutable model. Prediction is a pure function of the model
//! and the input rows; identical `(spec, data, seed)` always reproduce the
//! same model bit for bit.

pub mod forest;
pub mod gbt;
pub mod knn;
pub mod logistic;
pub mod mlp;
pub mod nb;
pub mod svm;
pub mod tree;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

pub use forest::{ForestModel, MaxFeatures, RFParams};
pub use gbt::{GBTModel, GBTParams};
pub use knn::{KNNModel, KNNParams, Metric, Weights};
pub use logistic::{LRModel, LRParams, Penalty, Solver};
pub use mlp::{MLPModel, MLPParams};
pub use nb::{NBModel, NBParams};
pub use svm::{Gamma, Kernel, SVMModel, SVMParams};
pub use tree::{Criterion, DTParams, TreeModel};

/// Classifier kind plus its typed hyperparameters. Serialized with an
/// explicit tag so config files read as `{"kind": "rf", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Dt(DTParams),
    Rf(RFParams),
    Knn(KNNParams),
    Nb(NBParams),
    Lr(LRParams),
    Svm(SVMParams),
    Gbt(GBTParams),
    Mlp(MLPParams),
}

impl ClassifierSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ClassifierSpec::Dt(_) => "dt",
            ClassifierSpec::Rf(_) => "rf",
            ClassifierSpec::Knn(_) => "knn",
            ClassifierSpec::Nb(_) => "nb",
            ClassifierSpec::Lr(_) => "lr",
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Gbt(_) => "gbt",
            ClassifierSpec::Mlp(_) => "mlp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Dt(p) => p.validate(),
            ClassifierSpec::Rf(p) => p.validate(),
            ClassifierSpec::Knn(p) => p.validate(),
            ClassifierSpec::Nb(p) => p.validate(),
            ClassifierSpec::Lr(p) => p.validate(),
            ClassifierSpec::Svm(p) => p.validate(),
            ClassifierSpec::Gbt(p) => p.validate(),
            ClassifierSpec::Mlp(p) => p.validate(),
        }
    }
}

/// A fitted classifier. Any variant predicts `Early`/`Late` for each input
/// row; `predict_score` additionally exposes a real-valued score, a
/// late-class probability in `[0, 1]` for every kind except `Svm`, which
/// reports the signed decision margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Dt(TreeModel),
    Rf(ForestModel),
    Knn(KNNModel),
    Nb(NBModel),
    Lr(LRModel),
    Svm(SVMModel),
    Gbt(GBTModel),
    Mlp(MLPModel),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Dt(_) => "dt",
            TrainedModel::Rf(_) => "rf",
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Nb(_) => "nb",
            TrainedModel::Lr(_) => "lr",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Gbt(_) => "gbt",
            TrainedModel::Mlp(_) => "mlp",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Dt(m) => m.n_features,
            TrainedModel::Rf(m) => m.n_features,
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Nb(m) => m.n_features,
            TrainedModel::Lr(m) => m.n_features,
            TrainedModel::Svm(m) => m.n_features,
            TrainedModel::Gbt(m) => m.n_features,
            TrainedModel::Mlp(m) => m.n_features,
        }
    }

    /// Convergence flag for the iterative kinds; `None` where the notion
    /// does not apply.
    pub fn converged(&self) -> Option<bool> {
        match self {
            TrainedModel::Lr(m) => Some(m.converged),
            TrainedModel::Svm(m) => Some(m.converged),
            _ => None,
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<StageLabel>> {
        self.check_features(x)?;
        Ok(match self {
            TrainedModel::Dt(m) => m.predict(x),
            TrainedModel::Rf(m) => m.predict(x),
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::Nb(m) => m.predict(x),
            TrainedModel::Lr(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
            TrainedModel::Gbt(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        })
    }

    pub fn predict_score(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_features(x)?;
        Ok(match self {
            TrainedModel::Dt(m) => m.scores(x),
            TrainedModel::Rf(m) => m.scores(x),
            TrainedModel::Knn(m) => m.scores(x),
            TrainedModel::Nb(m) => m.scores(x),
            TrainedModel::Lr(m) => m.scores(x),
            TrainedModel::Svm(m) => m.scores(x),
            TrainedModel::Gbt(m) => m.scores(x),
            TrainedModel::Mlp(m) => m.scores(x),
        })
    }

    fn check_features(&self, x: &Array2<f64>) -> Result<()> {
        let expected = self.n_features();
        if x.ncols() != expected {
            return Err(Error::FeatureCountMismatch { expected, found: x.ncols() });
        }
        Ok(())
    }
}

/// Trains the classifier described by `spec`. Requires at least one sample
/// of each class; a degenerate training set is an error rather than a model
/// that can only ever emit one label.
pub fn fit(
    spec: &ClassifierSpec,
    x: &Array2<f64>,
    y: &[StageLabel],
    seed: u64,
) -> Result<TrainedModel> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("classifier training matrix"));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    let counts = [
        y.iter().filter(|l| **l == StageLabel::Early).count(),
        y.iter().filter(|l| **l == StageLabel::Late).count(),
    ];
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("classifier training"));
    }
    spec.validate()?;
    Ok(match spec {
        ClassifierSpec::Dt(p) => TrainedModel::Dt(tree::fit_tree(x, y, p, seed)),
        ClassifierSpec::Rf(p) => TrainedModel::Rf(forest::fit_forest(x, y, p, seed)),
        ClassifierSpec::Knn(p) => TrainedModel::Knn(knn::fit_knn(x, y, p, seed)?),
        ClassifierSpec::Nb(p) => TrainedModel::Nb(nb::fit_nb(x, y, p, seed)?),
        ClassifierSpec::Lr(p) => TrainedModel::Lr(logistic::fit_lr(x, y, p, seed)),
        ClassifierSpec::Svm(p) => TrainedModel::Svm(svm::fit_svm(x, y, p, seed)?),
        ClassifierSpec::Gbt(p) => TrainedModel::Gbt(gbt::fit_gbt(x, y, p, seed)),
        ClassifierSpec::Mlp(p) => TrainedModel::Mlp(mlp::fit_mlp(x, y, p, seed)?),
    })
}
