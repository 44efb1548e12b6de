//! Per-feature centering and unit-variance scaling.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Fitted per-feature means and population standard deviations.
///
/// Zero stds are stored as computed; `apply` substitutes 1 for them so a
/// training-constant column maps to exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Array1<f64>,
    pub stds: Array1<f64>,
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        apply_standardizer(self, x)
    }
}

/// Fits means and stds (denominator n) on the training matrix.
pub fn fit_standardizer(x: &Array2<f64>) -> Result<Standardizer> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::GroupTooSmall {
            context: "standardizer fit",
            required: 2,
            found: n,
        });
    }
    let means = linalg::column_means(x);
    let stds = x
        .axis_iter(Axis(1))
        .zip(means.iter())
        .map(|(col, &m)| (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt())
        .collect::<Array1<f64>>();
    Ok(Standardizer { means, stds })
}

/// (x - mean) / std per column, with zero stds treated as 1.
pub fn apply_standardizer(model: &Standardizer, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::FeatureCountMismatch {
            expected: model.n_features(),
            found: x.ncols(),
        });
    }
    let mut out = x.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let m = model.means[j];
        let s = if model.stds[j] == 0.0 { 1.0 } else { model.stds[j] };
        col.mapv_inplace(|v| (v - m) / s);
    }
    Ok(out)
}
