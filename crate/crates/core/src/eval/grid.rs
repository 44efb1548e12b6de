//! Exhaustive hyperparameter grid search scored by cross-validated
//! weighted F1.
//!
//! Candidates are enumerated as the cartesian product of named value
//! lists, scored over a shared set of folds, and the best (ties to the
//! first in enumeration order) is refitted on the full training set.
//! Per-candidate fit seeds are derived from a hash of the candidate's
//! parameters, not its position, so reordering the lists cannot change
//! any candidate's score.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::classifiers::{fit, ClassifierSpec, TrainedModel};
use crate::data::StageLabel;
use crate::error::{Error, Result};
use crate::eval::kfold::{kfold, stratified_kfold, Fold};
use crate::eval::metrics::{metrics, ConfusionMatrix};
use crate::rng::{derive, derive_indexed, stream};

pub const DEFAULT_CV_FOLDS: usize = 5;

/// A classifier kind plus named lists of hyperparameter values to sweep.
/// Keys must match the classifier's parameter names; unknown keys fail at
/// enumeration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<Value>>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
}

fn default_cv_folds() -> usize {
    DEFAULT_CV_FOLDS
}

impl GridSpec {
    /// Cartesian product size.
    pub fn candidate_count(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    /// Materialize every candidate in deterministic order: keys in sorted
    /// order, rightmost key cycling fastest.
    pub fn enumerate(&self) -> Result<Vec<ClassifierSpec>> {
        if self.params.values().any(Vec::is_empty) {
            return Err(Error::EmptyGrid);
        }
        let keys: Vec<&String> = self.params.keys().collect();
        let lists: Vec<&Vec<Value>> = self.params.values().collect();
        let total = self.candidate_count();
        let mut specs = Vec::with_capacity(total);
        let mut odometer = vec![0usize; keys.len()];
        for _ in 0..total {
            let mut obj = serde_json::Map::new();
            for (slot, &key) in keys.iter().enumerate() {
                obj.insert(key.clone(), lists[slot][odometer[slot]].clone());
            }
            let value = json!({ "kind": self.kind, "params": Value::Object(obj) });
            let spec: ClassifierSpec = serde_json::from_value(value.clone())
                .map_err(|e| Error::Config(format!("grid candidate {value}: {e}")))?;
            spec.validate()?;
            specs.push(spec);
            for slot in (0..odometer.len()).rev() {
                odometer[slot] += 1;
                if odometer[slot] < lists[slot].len() {
                    break;
                }
                odometer[slot] = 0;
            }
        }
        if specs.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(specs)
    }
}

/// The published sweep for each classifier kind.
pub fn default_grid(kind: &str) -> Result<GridSpec> {
    let params: Vec<(&str, Vec<Value>)> = match kind {
        "dt" => vec![
            ("criterion", vec![json!("gini"), json!("entropy")]),
            ("max_depth", vec![json!(null), json!(10), json!(20), json!(30)]),
            ("min_samples_split", vec![json!(2), json!(5), json!(10)]),
            ("min_samples_leaf", vec![json!(1), json!(2), json!(4)]),
            ("max_features", vec![json!(4), json!(6), json!(8)]),
        ],
        "rf" => vec![
            ("n_estimators", vec![json!(50), json!(100), json!(200)]),
            ("max_depth", vec![json!(null), json!(10), json!(20), json!(30)]),
            ("min_samples_split", vec![json!(2), json!(5), json!(10)]),
        ],
        "knn" => vec![
            (
                "n_neighbors",
                vec![json!(3), json!(5), json!(7), json!(9), json!(11)],
            ),
            ("weights", vec![json!("uniform"), json!("distance")]),
            ("metric", vec![json!("euclidean"), json!("manhattan")]),
        ],
        "nb" => vec![(
            "var_smoothing",
            vec![json!(1e-9), json!(1e-8), json!(1e-7), json!(1e-6)],
        )],
        "lr" => vec![
            (
                "C",
                vec![
                    json!(0.001),
                    json!(0.01),
                    json!(0.1),
                    json!(1.0),
                    json!(10.0),
                    json!(100.0),
                ],
            ),
            (
                "penalty",
                vec![json!("l1"), json!("l2"), json!("elasticnet"), json!("none")],
            ),
            ("solver", vec![json!("liblinear"), json!("saga")]),
            ("max_iter", vec![json!(100), json!(200), json!(300)]),
        ],
        "svm" => vec![
            ("C", vec![json!(0.1), json!(1.0), json!(10.0), json!(100.0)]),
            (
                "kernel",
                vec![json!("linear"), json!("poly"), json!("rbf"), json!("sigmoid")],
            ),
            ("gamma", vec![json!("scale"), json!("auto")]),
        ],
        "gbt" => vec![
            ("n_estimators", vec![json!(50), json!(100), json!(150)]),
            ("max_depth", vec![json!(3), json!(5), json!(7)]),
            ("learning_rate", vec![json!(0.01), json!(0.1), json!(0.2)]),
        ],
        "mlp" => vec![],
        other => {
            return Err(Error::Config(format!(
                "no default grid for classifier kind {other:?}"
            )))
        }
    };
    Ok(GridSpec {
        kind: kind.to_string(),
        params: params
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        cv_folds: DEFAULT_CV_FOLDS,
    })
}

/// One grid point's cross-validation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub spec: ClassifierSpec,
    /// Canonical parameter JSON, also the input to the fit-seed hash.
    pub params_json: String,
    /// Weighted F1 (percent) per fold; degenerate folds score 0.
    pub fold_scores: Vec<f64>,
    pub mean_weighted_f1: f64,
    /// Folds whose training half collapsed to a single class.
    pub degenerate_folds: usize,
}

#[derive(Debug)]
pub struct GridSearchOutcome {
    pub best_index: usize,
    pub best_spec: ClassifierSpec,
    /// Best candidate refitted on the full training set.
    pub model: TrainedModel,
    pub table: Vec<CandidateResult>,
}

/// Seed material tied to the candidate's parameter content so scores are
/// invariant under enumeration order.
fn candidate_hash(params_json: &str) -> u64 {
    let digest = Sha256::digest(params_json.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn select_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn score_candidate(
    index: usize,
    spec: &ClassifierSpec,
    x: &Array2<f64>,
    y: &[StageLabel],
    folds: &[Fold],
    candidate_seed: u64,
) -> Result<CandidateResult> {
    let mut fold_scores = Vec::with_capacity(folds.len());
    let mut degenerate_folds = 0;
    for (f, fold) in folds.iter().enumerate() {
        let y_train: Vec<StageLabel> = fold.train.iter().map(|&i| y[i]).collect();
        let fit_seed = derive_indexed(candidate_seed, stream::FIT, f as u64);
        let model = match fit(spec, &select_rows(x, &fold.train), &y_train, fit_seed) {
            Ok(m) => m,
            Err(Error::SingleClass(_)) => {
                degenerate_folds += 1;
                fold_scores.push(0.0);
                continue;
            }
            Err(e) => {
                return Err(Error::TrialFailed {
                    run: index,
                    source: Box::new(e),
                })
            }
        };
        let y_test: Vec<StageLabel> = fold.test.iter().map(|&i| y[i]).collect();
        let pred = model.predict(&select_rows(x, &fold.test))?;
        let cm = ConfusionMatrix::from_labels(&y_test, &pred)?;
        fold_scores.push(metrics(&cm).weighted_f1);
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CandidateResult {
        index,
        spec: spec.clone(),
        params_json: String::new(),
        fold_scores,
        mean_weighted_f1: mean,
        degenerate_folds,
    })
}

/// Score every grid point by k-fold weighted F1 and refit the best on the
/// full data. Folds are stratified when every class has at least
/// `cv_folds` members, plain otherwise, and are shared by all candidates.
pub fn grid_search(
    grid: &GridSpec,
    x: &Array2<f64>,
    y: &[StageLabel],
    seed: u64,
) -> Result<GridSearchOutcome> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("grid search training matrix"));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    let specs = grid.enumerate()?;
    let folds = match stratified_kfold(y, grid.cv_folds, true, seed) {
        Ok(f) => f,
        Err(Error::StratificationImpossible(_)) => kfold(y.len(), grid.cv_folds, true, seed)?,
        Err(e) => return Err(e),
    };
    let mut table: Vec<CandidateResult> = specs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let params_json = candidate_params_json(spec)?;
            let candidate_seed = derive_indexed(seed, stream::GRID, candidate_hash(&params_json));
            let mut result = score_candidate(index, spec, x, y, &folds, candidate_seed)?;
            result.params_json = params_json;
            Ok(result)
        })
        .collect::<Result<_>>()?;
    table.sort_by_key(|r| r.index);
    let best_index = table
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.mean_weighted_f1
                .total_cmp(&b.mean_weighted_f1)
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("grid enumeration is non-empty");
    let best_spec = table[best_index].spec.clone();
    let refit_seed = derive(
        derive_indexed(seed, stream::GRID, candidate_hash(&table[best_index].params_json)),
        stream::REFIT,
    );
    let model = fit(&best_spec, x, y, refit_seed)?;
    Ok(GridSearchOutcome {
        best_index,
        best_spec,
        model,
        table,
    })
}

/// Canonical JSON of a candidate's parameters (the "params" payload of
/// its tagged encoding).
fn candidate_params_json(spec: &ClassifierSpec) -> Result<String> {
    let value = serde_json::to_value(spec)?;
    let params = value
        .get("params")
        .cloned()
        .unwrap_or(Value::Object(serde_json::Map::new()));
    Ok(serde_json::to_string(&params)?)
}
