//! Gaussian naive Bayes with library-compatible variance smoothing.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NBParams {
    pub var_smoothing: f64,
}

impl Default for NBParams {
    fn default() -> Self {
        NBParams { var_smoothing: 1e-9 }
    }
}

impl NBParams {
    pub fn validate(&self) -> Result<()> {
        if !self.var_smoothing.is_finite() || self.var_smoothing < 0.0 {
            return Err(Error::InvalidParameter {
                name: "var_smoothing".into(),
                reason: "must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBModel {
    pub params: NBParams,
    pub priors: [f64; 2],
    /// Per-class feature means, one row per class in `StageLabel` order.
    pub means: Array2<f64>,
    /// Per-class feature variances after smoothing; strictly positive.
    pub variances: Array2<f64>,
    pub n_features: usize,
    pub seed: u64,
}

/// Per-class means and population variances, each variance lifted by
/// `var_smoothing` times the largest per-feature variance of the whole
/// training set.
pub(crate) fn fit_nb(
    x: &Array2<f64>,
    y: &[StageLabel],
    params: &NBParams,
    seed: u64,
) -> Result<NBModel> {
    let (n, p) = x.dim();
    let mut means = Array2::zeros((2, p));
    let mut variances = Array2::zeros((2, p));
    let mut priors = [0.0f64; 2];
    for (c, label) in StageLabel::ALL.iter().enumerate() {
        let rows: Vec<usize> =
            (0..n).filter(|&i| y[i] == *label).collect();
        priors[c] = rows.len() as f64 / n as f64;
        for j in 0..p {
            let vals: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            means[[c, j]] = mean;
            variances[[c, j]] = var;
        }
    }
    let max_total_var = (0..p)
        .map(|j| {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
        })
        .fold(0.0f64, f64::max);
    let epsilon = params.var_smoothing * max_total_var;
    variances.mapv_inplace(|v| v + epsilon);
    if variances.iter().any(|v| *v <= 0.0) {
        return Err(Error::Numerical(
            "zero class variance survives smoothing; the training matrix is constant".into(),
        ));
    }
    Ok(NBModel { params: *params, priors, means, variances, n_features: p, seed })
}

impl NBModel {
    fn joint_log_likelihood(&self, row: ArrayView1<f64>, c: usize) -> f64 {
        let mut ll = self.priors[c].ln();
        for (j, v) in row.iter().enumerate() {
            let var = self.variances[[c, j]];
            let d = v - self.means[[c, j]];
            ll += -0.5 * (std::f64::consts::TAU * var).ln() - d * d / (2.0 * var);
        }
        ll
    }

    /// Argmax posterior; an exact tie goes to `Early`.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<StageLabel> {
        x.rows()
            .into_iter()
            .map(|row| {
                if self.joint_log_likelihood(row, 1) > self.joint_log_likelihood(row, 0) {
                    StageLabel::Late
                } else {
                    StageLabel::Early
                }
            })
            .collect()
    }

    /// Posterior P(Late | row).
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let d = self.joint_log_likelihood(row, 0) - self.joint_log_likelihood(row, 1);
                1.0 / (1.0 + d.exp())
            })
            .collect()
    }
}
