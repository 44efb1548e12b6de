//! Flag-over-config resolution and shared I/O plumbing.

use std::fs;
use std::path::{Path, PathBuf};

use exprstage::classifiers::ClassifierSpec;
use exprstage::config::{ModelConfig, PipelineConfig};
use exprstage::data::{
    read_expression_matrix, read_labels, LabeledDataset, Orientation, ParseOptions,
};
use exprstage::error::{Error, Result};
use exprstage::eval::grid::default_grid;

use crate::args::{CommonArgs, OrientationArg};

impl From<OrientationArg> for Orientation {
    fn from(arg: OrientationArg) -> Orientation {
        match arg {
            OrientationArg::SamplesRows => Orientation::SamplesRows,
            OrientationArg::GenesRows => Orientation::GenesRows,
        }
    }
}

/// Build the effective config: the JSON file if given, then flag
/// overrides on top. Without a config file, --matrix and --labels are
/// required and the model block starts empty.
pub fn resolve_config(common: &CommonArgs) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::from_path(path)?,
        None => {
            let matrix = common.matrix.as_ref().ok_or_else(|| {
                Error::Config("either --config or --matrix/--labels is required".into())
            })?;
            let labels = common.labels.as_ref().ok_or_else(|| {
                Error::Config("either --config or --matrix/--labels is required".into())
            })?;
            PipelineConfig::new(
                matrix.display().to_string(),
                labels.display().to_string(),
                ModelConfig {
                    classifier: None,
                    grid: None,
                },
            )
        }
    };
    if let Some(matrix) = &common.matrix {
        config.matrix = matrix.display().to_string();
    }
    if let Some(labels) = &common.labels {
        config.labels = labels.display().to_string();
    }
    if let Some(orientation) = common.orientation {
        config.orientation = orientation.into();
    }
    if common.log2 {
        config.log_transform = true;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.display().to_string();
    }
    Ok(config)
}

/// A classifier spec with all-default parameters for the given kind.
pub fn spec_from_kind(kind: &str) -> Result<ClassifierSpec> {
    serde_json::from_value(serde_json::json!({ "kind": kind, "params": {} }))
        .map_err(|e| Error::Config(format!("unknown classifier kind {kind:?}: {e}")))
}

/// Apply --classifier / --grid on top of the config's model block.
pub fn apply_model_flags(
    config: &mut PipelineConfig,
    classifier: &Option<String>,
    grid: &Option<String>,
) -> Result<()> {
    match (classifier, grid) {
        (Some(_), Some(_)) => Err(Error::Config(
            "--classifier and --grid are mutually exclusive".into(),
        )),
        (Some(kind), None) => {
            config.model = ModelConfig::classifier(spec_from_kind(kind)?);
            Ok(())
        }
        (None, Some(kind)) => {
            config.model = ModelConfig::grid(default_grid(kind)?);
            Ok(())
        }
        (None, None) => Ok(()),
    }
}

pub fn load_dataset(config: &PipelineConfig) -> Result<LabeledDataset> {
    let options = ParseOptions {
        delimiter: b'\t',
        orientation: config.orientation,
        log_transform: config.log_transform,
    };
    let matrix = read_expression_matrix(Path::new(&config.matrix), &options)?;
    let labels = read_labels(Path::new(&config.labels), &matrix)?;
    LabeledDataset::new(matrix, labels)
}

/// Output directory: files are built in memory first, so a failed writer
/// never leaves a partial file.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(OutDir { dir })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    }
}
