//! Run configuration: one JSON document fixes the data sources, every
//! stage's parameters, the model (single spec or grid), and the master
//! seed. Unknown keys are rejected so typos cannot silently disable a
//! stage.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::SmoteTarget;
use crate::classifiers::ClassifierSpec;
use crate::data::Orientation;
use crate::error::{Error, Result};
use crate::eval::grid::GridSpec;
use crate::select::ScoreFunc;
use crate::stats::DEGParams;

fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    0.05
}
fn default_smote_k() -> usize {
    5
}
fn default_smote_target() -> SmoteTarget {
    SmoteTarget::BalanceToMajority
}
fn default_sfa_mu() -> f64 {
    1.0
}
fn default_sfa_sigma() -> f64 {
    0.1
}
fn default_noise_sigma() -> f64 {
    0.01
}
fn default_noise_factor() -> usize {
    10
}
fn default_ica_max_iter() -> usize {
    200
}
fn default_ica_tol() -> f64 {
    1e-4
}
fn default_output_dir() -> String {
    "out".into()
}

/// Univariate selection rule. Only false-positive-rate thresholding is
/// implemented; the enum keeps the config shape explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    #[default]
    SelectFpr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default)]
    pub method: SelectionMethod,
    #[serde(default)]
    pub score_func: ScoreFunc,
    /// Keep features with p < alpha.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            method: SelectionMethod::SelectFpr,
            score_func: ScoreFunc::FClassif,
            alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    #[default]
    None,
    Pca {
        n_components: usize,
    },
    Ica {
        n_components: usize,
        #[serde(default = "default_ica_max_iter")]
        max_iter: usize,
        #[serde(default = "default_ica_tol")]
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentationConfig {
    #[default]
    None,
    Smote {
        #[serde(default = "default_smote_k")]
        k_neighbors: usize,
        #[serde(default = "default_smote_target")]
        target: SmoteTarget,
    },
    /// Append one perturbed copy of each training row: z' = a.z + b with
    /// a ~ N(mu, sigma1^2), b ~ N(0, sigma2^2).
    Sfa {
        #[serde(default = "default_sfa_mu")]
        mu: f64,
        #[serde(default = "default_sfa_sigma")]
        sigma1: f64,
        #[serde(default = "default_sfa_sigma")]
        sigma2: f64,
    },
    /// Expand the training set to factor x its size with additive noise.
    Gaussian {
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_noise_sigma")]
        sigma: f64,
        #[serde(default = "default_true")]
        relative: bool,
        #[serde(default = "default_noise_factor")]
        factor: usize,
    },
}

/// Exactly one of `classifier` (a fixed spec) or `grid` (a sweep).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl ModelConfig {
    pub fn classifier(spec: ClassifierSpec) -> Self {
        ModelConfig {
            classifier: Some(spec),
            grid: None,
        }
    }

    pub fn grid(grid: GridSpec) -> Self {
        ModelConfig {
            classifier: None,
            grid: Some(grid),
        }
    }

    /// The classifier kind this model resolves to, for report labeling.
    pub fn kind_name(&self) -> &str {
        match (&self.classifier, &self.grid) {
            (Some(spec), _) => spec.kind_name(),
            (None, Some(grid)) => &grid.kind,
            (None, None) => "unspecified",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.classifier, &self.grid) {
            (Some(spec), None) => spec.validate(),
            (None, Some(grid)) => {
                grid.enumerate()?;
                Ok(())
            }
            _ => Err(Error::Config(
                "model requires exactly one of `classifier` or `grid`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Held-out share for single splits and repeated trials.
    pub test_fraction: f64,
    /// Repeated-trial count.
    pub n_runs: usize,
    /// Fold count for whole-pipeline cross-validation.
    pub cv_folds: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            test_fraction: 0.2,
            n_runs: 100,
            cv_folds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Expression matrix path (delimited text).
    pub matrix: String,
    /// Sample-to-stage label table path.
    pub labels: String,
    #[serde(default)]
    pub orientation: Orientation,
    /// Apply log2(x + 1) at ingestion.
    #[serde(default)]
    pub log_transform: bool,
    /// Fit per-feature z-scaling on the training split.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Differential-expression report parameters; the table is written as
    /// a side output and does not gate the model path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deg: Option<DEGParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

impl PipelineConfig {
    /// Minimal config with defaults everywhere else.
    pub fn new(matrix: impl Into<String>, labels: impl Into<String>, model: ModelConfig) -> Self {
        PipelineConfig {
            matrix: matrix.into(),
            labels: labels.into(),
            orientation: Orientation::default(),
            log_transform: false,
            standardize: true,
            deg: None,
            selection: None,
            transform: TransformConfig::None,
            augmentation: AugmentationConfig::None,
            model,
            evaluation: EvaluationConfig::default(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json_str(&text)
    }

    /// Canonical JSON for hashing and for embedding in run outputs.
    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash_hex(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(sel) = &self.selection {
            if !(sel.alpha > 0.0 && sel.alpha < 1.0) {
                return Err(Error::Config(format!(
                    "selection.alpha {} outside (0, 1)",
                    sel.alpha
                )));
            }
        }
        match &self.transform {
            TransformConfig::None => {}
            TransformConfig::Pca { n_components } | TransformConfig::Ica { n_components, .. } => {
                if *n_components == 0 {
                    return Err(Error::Config("transform.n_components must be >= 1".into()));
                }
            }
        }
        match &self.augmentation {
            AugmentationConfig::None => {}
            AugmentationConfig::Smote { k_neighbors, .. } => {
                if *k_neighbors == 0 {
                    return Err(Error::Config("augmentation.k_neighbors must be >= 1".into()));
                }
            }
            AugmentationConfig::Sfa { sigma1, sigma2, .. } => {
                if !(*sigma1 >= 0.0) || !(*sigma2 >= 0.0) {
                    return Err(Error::Config("augmentation sigmas must be >= 0".into()));
                }
            }
            AugmentationConfig::Gaussian { sigma, factor, .. } => {
                if !(*sigma >= 0.0) {
                    return Err(Error::Config("augmentation.sigma must be >= 0".into()));
                }
                if *factor == 0 {
                    return Err(Error::Config("augmentation.factor must be >= 1".into()));
                }
            }
        }
        let eval = &self.evaluation;
        if !(eval.test_fraction > 0.0 && eval.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "evaluation.test_fraction {} outside (0, 1)",
                eval.test_fraction
            )));
        }
        if eval.n_runs == 0 {
            return Err(Error::Config("evaluation.n_runs must be >= 1".into()));
        }
        if eval.cv_folds < 2 {
            return Err(Error::Config("evaluation.cv_folds must be >= 2".into()));
        }
        Ok(())
    }
}
