//! End-to-end pipeline: fit the preprocessing stages and the model on a
//! training split, score held-out data, and drive the repeated-trial and
//! whole-pipeline cross-validation protocols.
//!
//! Every fit-type stage (standardizer, selection, transform, augmentation,
//! classifier) sees training rows only. A fitted pipeline remembers its
//! training sample ids and refuses to evaluate on any overlap.

use std::collections::BTreeSet;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{self, NoiseParams, SFAParams, SmoteParams};
use crate::classifiers::{fit, ClassifierSpec, TrainedModel};
use crate::config::{AugmentationConfig, ModelConfig, PipelineConfig, TransformConfig};
use crate::data::{split, ExpressionMatrix, LabeledDataset, StageLabel};
use crate::error::{Error, Result};
use crate::eval::grid::{grid_search, CandidateResult};
use crate::eval::kfold::{kfold, stratified_kfold, Fold};
use crate::eval::metrics::{metrics, ConfusionMatrix, MetricReport};
use crate::rng::{derive, derive_indexed, stream};
use crate::select::{anova_f_classif, select_fpr, FeatureScore, SelectionMask};
use crate::transform::{
    fit_standardizer, ica_fit, pca_fit, ICAModel, ICAParams, PCAModel, Standardizer,
};

/// A fitted dimensionality transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", content = "model", rename_all = "snake_case")]
pub enum TransformModel {
    Pca(PCAModel),
    Ica(ICAModel),
}

impl TransformModel {
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            TransformModel::Pca(m) => m.transform(x),
            TransformModel::Ica(m) => m.transform(x),
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            TransformModel::Pca(m) => m.n_components(),
            TransformModel::Ica(m) => m.n_components,
        }
    }

    pub fn feature_prefix(&self) -> &'static str {
        match self {
            TransformModel::Pca(_) => "pc",
            TransformModel::Ica(_) => "ic",
        }
    }
}

/// Preprocessing stages fitted on one training split, applied in order:
/// standardize, select, transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedStages {
    pub standardizer: Option<Standardizer>,
    pub selection: Option<SelectionMask>,
    pub transform: Option<TransformModel>,
}

impl FittedStages {
    /// Map raw features into the model's input space.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut x = x.clone();
        if let Some(std) = &self.standardizer {
            x = std.apply(&x)?;
        }
        if let Some(mask) = &self.selection {
            for &j in &mask.kept_indices {
                if j >= x.ncols() {
                    return Err(Error::IndexOutOfRange {
                        index: j,
                        len: x.ncols(),
                    });
                }
            }
            x = x.select(ndarray::Axis(1), &mask.kept_indices);
        }
        if let Some(tf) = &self.transform {
            x = tf.transform(&x)?;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub stages: FittedStages,
    /// The classifier spec actually fitted: the configured one, or the grid winner.
    pub spec: ClassifierSpec,
    pub model: TrainedModel,
    /// Selection scores on the (standardized) training data, for reports.
    pub selection_scores: Option<Vec<FeatureScore>>,
    /// Per-candidate cross-validation table when a grid was searched.
    pub grid_table: Option<Vec<CandidateResult>>,
    pub best_index: Option<usize>,
    train_ids: BTreeSet<String>,
}

/// One held-out evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub report: MetricReport,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<StageLabel>,
}

impl TrainedPipeline {
    pub fn train_ids(&self) -> &BTreeSet<String> {
        &self.train_ids
    }

    /// Predict labels for a raw matrix (no leakage guard: scoring the
    /// training data itself is legitimate for diagnostics).
    pub fn predict(&self, matrix: &ExpressionMatrix) -> Result<Vec<StageLabel>> {
        let x = self.stages.apply(matrix.values())?;
        self.model.predict(&x)
    }

    /// Score a held-out set. Any sample id shared with the training split
    /// is a hard error: metrics computed on fitted-on rows are void.
    pub fn evaluate(&self, test: &LabeledDataset) -> Result<EvalOutcome> {
        let overlap = test
            .matrix()
            .sample_ids()
            .iter()
            .filter(|id| self.train_ids.contains(*id))
            .count();
        if overlap > 0 {
            return Err(Error::Leakage { overlap });
        }
        let predictions = self.predict(test.matrix())?;
        let confusion = ConfusionMatrix::from_labels(test.labels(), &predictions)?;
        Ok(EvalOutcome {
            report: metrics(&confusion),
            confusion,
            predictions,
        })
    }
}

/// Append SFA rows (one perturbed copy per original) with derived ids.
pub fn append_sfa_rows(base: &LabeledDataset, extra: Array2<f64>) -> Result<LabeledDataset> {
    let n = base.n_samples();
    let p = extra.ncols();
    let mut values = Array2::zeros((2 * n, p));
    values.slice_mut(s![..n, ..]).assign(base.x());
    values.slice_mut(s![n.., ..]).assign(&extra);
    let mut ids: Vec<String> = base.matrix().sample_ids().to_vec();
    let mut taken: BTreeSet<String> = ids.iter().cloned().collect();
    for i in 0..n {
        let mut id = format!("{}_sfa", base.matrix().sample_ids()[i]);
        while taken.contains(&id) {
            id.push('x');
        }
        taken.insert(id.clone());
        ids.push(id);
    }
    let mut labels = base.labels().to_vec();
    labels.extend_from_slice(base.labels());
    let matrix = ExpressionMatrix::new(ids, base.matrix().gene_ids().to_vec(), values)?;
    LabeledDataset::new(matrix, labels)
}

/// Fit every configured stage and the model on `train`. All randomness
/// descends from `seed`; the config's paths and evaluation block are not
/// consulted here.
pub fn fit_pipeline(
    config: &PipelineConfig,
    train: &LabeledDataset,
    seed: u64,
) -> Result<TrainedPipeline> {
    let train_ids: BTreeSet<String> = train.matrix().sample_ids().iter().cloned().collect();
    let mut matrix = train.matrix().clone();
    let labels = train.labels().to_vec();

    let standardizer = if config.standardize {
        let std = fit_standardizer(matrix.values())?;
        matrix = matrix.with_values(matrix.gene_ids().to_vec(), std.apply(matrix.values())?)?;
        Some(std)
    } else {
        None
    };

    let (selection_scores, selection) = if let Some(sel) = &config.selection {
        let ds = LabeledDataset::new(matrix.clone(), labels.clone())?;
        let scores = anova_f_classif(&ds)?;
        let mask = select_fpr(&scores, sel.alpha)?;
        matrix = crate::select::project(&matrix, &mask)?;
        (Some(scores), Some(mask))
    } else {
        (None, None)
    };

    let transform = match &config.transform {
        TransformConfig::None => None,
        TransformConfig::Pca { n_components } => {
            let model = pca_fit(matrix.values(), *n_components)?;
            Some(TransformModel::Pca(model))
        }
        TransformConfig::Ica {
            n_components,
            max_iter,
            tol,
        } => {
            let params = ICAParams {
                n_components: *n_components,
                max_iter: *max_iter,
                tol: *tol,
                seed,
            };
            Some(TransformModel::Ica(ica_fit(matrix.values(), &params)?))
        }
    };
    if let Some(tf) = &transform {
        let names = (1..=tf.n_components())
            .map(|i| format!("{}_{i}", tf.feature_prefix()))
            .collect();
        matrix = matrix.with_values(names, tf.transform(matrix.values())?)?;
    }

    let mut dataset = LabeledDataset::new(matrix, labels)?;
    match &config.augmentation {
        AugmentationConfig::None => {}
        AugmentationConfig::Smote { k_neighbors, target } => {
            let params = SmoteParams {
                k_neighbors: *k_neighbors,
                target: *target,
                seed,
            };
            dataset = augment::smote(&dataset, &params)?.dataset;
        }
        AugmentationConfig::Sfa { mu, sigma1, sigma2 } => {
            let params = SFAParams {
                mu: *mu,
                sigma1: *sigma1,
                sigma2: *sigma2,
            };
            let extra = augment::sfa(dataset.x(), &params, seed)?;
            dataset = append_sfa_rows(&dataset, extra)?;
        }
        AugmentationConfig::Gaussian {
            mu,
            sigma,
            relative,
            factor,
        } => {
            let params = NoiseParams {
                mu: *mu,
                sigma: *sigma,
                relative: *relative,
                factor: *factor,
            };
            dataset = augment::gaussian_expand(&dataset, &params, seed)?.dataset;
        }
    }

    let (spec, model, grid_table, best_index) = match &config.model {
        ModelConfig {
            classifier: Some(spec),
            grid: None,
        } => {
            let model = fit(spec, dataset.x(), dataset.labels(), derive(seed, stream::FIT))?;
            (spec.clone(), model, None, None)
        }
        ModelConfig {
            classifier: None,
            grid: Some(grid),
        } => {
            let out = grid_search(grid, dataset.x(), dataset.labels(), seed)?;
            (out.best_spec, out.model, Some(out.table), Some(out.best_index))
        }
        _ => {
            return Err(Error::Config(
                "model requires exactly one of `classifier` or `grid`".into(),
            ))
        }
    };

    Ok(TrainedPipeline {
        stages: FittedStages {
            standardizer,
            selection,
            transform,
        },
        spec,
        model,
        selection_scores,
        grid_table,
        best_index,
        train_ids,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub report: MetricReport,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub best: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> MetricSummary {
    let n = values.clone().count() as f64;
    MetricSummary {
        mean: values.clone().sum::<f64>() / n,
        best: values.fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Repeated random-split results: weighted metrics per run plus their
/// mean and best.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n_runs: usize,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub runs: Vec<RunRecord>,
}

/// Re-split, refit, and re-evaluate `n_runs` times. Run r draws its seed
/// from (seed, r), so runs are independent and any one can be replayed;
/// the first failing run aborts the whole protocol with its index.
pub fn repeated_trials(
    config: &PipelineConfig,
    data: &LabeledDataset,
    n_runs: usize,
    seed: u64,
) -> Result<TrialSummary> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter {
            name: "n_runs".into(),
            reason: "must be at least 1".into(),
        });
    }
    let runs: Vec<RunRecord> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = derive_indexed(seed, stream::TRIAL, run as u64);
            let wrap = |e: Error| Error::TrialFailed {
                run,
                source: Box::new(e),
            };
            let pair = split(data, config.evaluation.test_fraction, true, run_seed)
                .map_err(wrap)?;
            let pipeline = fit_pipeline(config, &pair.train, run_seed).map_err(wrap)?;
            let outcome = pipeline.evaluate(&pair.test).map_err(wrap)?;
            Ok(RunRecord {
                run,
                seed: run_seed,
                report: outcome.report,
                confusion: outcome.confusion,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrialSummary {
        n_runs,
        precision: summarize(runs.iter().map(|r| r.report.weighted_precision)),
        recall: summarize(runs.iter().map(|r| r.report.weighted_recall)),
        f1: summarize(runs.iter().map(|r| r.report.weighted_f1)),
        runs,
    })
}

/// One fold's outcome in whole-pipeline cross-validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvFold {
    pub fold: usize,
    pub weighted_f1: f64,
    /// Training half collapsed to one class; scored 0 without fitting.
    pub single_class_train: bool,
    pub report: Option<MetricReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: Vec<CvFold>,
    pub mean_weighted_f1: f64,
}

/// K-fold cross-validation of the whole pipeline: every stage, including
/// selection and augmentation, is refitted inside each fold so no
/// statistic of the fold's test rows can reach the model.
pub fn cross_validate(
    config: &PipelineConfig,
    data: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<CvOutcome> {
    let folds: Vec<Fold> = match stratified_kfold(data.labels(), k, true, seed) {
        Ok(f) => f,
        Err(Error::StratificationImpossible(_)) => kfold(data.n_samples(), k, true, seed)?,
        Err(e) => return Err(e),
    };
    let folds: Vec<CvFold> = folds
        .into_par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let wrap = |e: Error| Error::TrialFailed {
                run: f,
                source: Box::new(e),
            };
            let train = data.subset(&fold.train).map_err(wrap)?;
            let test = data.subset(&fold.test).map_err(wrap)?;
            let fit_seed = derive_indexed(seed, stream::FIT, f as u64);
            match fit_pipeline(config, &train, fit_seed) {
                Ok(pipeline) => {
                    let outcome = pipeline.evaluate(&test).map_err(wrap)?;
                    Ok(CvFold {
                        fold: f,
                        weighted_f1: outcome.report.weighted_f1,
                        single_class_train: false,
                        report: Some(outcome.report),
                    })
                }
                Err(Error::SingleClass(_)) => Ok(CvFold {
                    fold: f,
                    weighted_f1: 0.0,
                    single_class_train: true,
                    report: None,
                }),
                Err(e) => Err(wrap(e)),
            }
        })
        .collect::<Result<_>>()?;
    let mean = folds.iter().map(|f| f.weighted_f1).sum::<f64>() / folds.len() as f64;
    Ok(CvOutcome {
        folds,
        mean_weighted_f1: mean,
    })
}
