//! Univariate feature scoring (one-way ANOVA F) and false-positive-rate
//! selection: keep every feature whose p-value is below alpha.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ExpressionMatrix, LabeledDataset, StageLabel};
use crate::error::{Error, Result};
use crate::special::f_sf;
use crate::stats::P_FLOOR;

/// Scoring function for univariate selection. Only the ANOVA F test is
/// implemented; the enum keeps the extension point explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFunc {
    #[default]
    FClassif,
}

/// One feature's ANOVA score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature_index: usize,
    pub f_stat: f64,
    pub p_value: f64,
}

/// The indices that survived thresholding, with the alpha that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub kept_indices: Vec<usize>,
    pub alpha: f64,
}

impl SelectionMask {
    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

/// One-way ANOVA F per feature: F = between-group MS / within-group MS,
/// p from the F(k-1, n-k) survival function.
///
/// A feature constant across the whole dataset has both mean squares zero
/// and scores F = 0, p = 1 (constants carry no class signal). The other
/// degenerate corner, distinct class means with zero within-class spread,
/// saturates at F = f64::MAX, p = `P_FLOOR`.
pub fn anova_f_classif(dataset: &LabeledDataset) -> Result<Vec<FeatureScore>> {
    let classes: Vec<Vec<usize>> = StageLabel::ALL
        .iter()
        .map(|&l| dataset.class_indices(l))
        .collect();
    if classes.iter().any(|c| c.is_empty()) {
        return Err(Error::SingleClass("ANOVA F scoring"));
    }
    let n = dataset.n_samples();
    let k = classes.len();
    if n <= k {
        return Err(Error::GroupTooSmall {
            context: "ANOVA F scoring",
            required: k + 1,
            found: n,
        });
    }

    let x = dataset.x();
    let scores: Vec<FeatureScore> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let grand = col.iter().sum::<f64>() / n as f64;
            let mut ssb = 0.0;
            let mut ssw = 0.0;
            for class in &classes {
                let m = class.iter().map(|&i| col[i]).sum::<f64>() / class.len() as f64;
                ssb += class.len() as f64 * (m - grand) * (m - grand);
                ssw += class.iter().map(|&i| (col[i] - m) * (col[i] - m)).sum::<f64>();
            }
            let msb = ssb / (k as f64 - 1.0);
            let msw = ssw / (n - k) as f64;
            let (f_stat, p_value) = if msw == 0.0 {
                if msb == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::MAX, P_FLOOR)
                }
            } else {
                let f = msb / msw;
                (f, f_sf(f, (k - 1) as f64, (n - k) as f64))
            };
            FeatureScore { feature_index: j, f_stat, p_value }
        })
        .collect();
    Ok(scores)
}

/// Keeps every feature with p < alpha (strict). An empty result is valid;
/// projection is where emptiness becomes an error.
pub fn select_fpr(scores: &[FeatureScore], alpha: f64) -> Result<SelectionMask> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no feature scores to threshold"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha".into(),
            reason: format!("{alpha} outside (0, 1]"),
        });
    }
    let kept_indices = scores
        .iter()
        .filter(|s| s.p_value < alpha)
        .map(|s| s.feature_index)
        .collect();
    Ok(SelectionMask { kept_indices, alpha })
}

/// Column-subsets a matrix to the mask's indices, filtering gene ids to match.
pub fn project(matrix: &ExpressionMatrix, mask: &SelectionMask) -> Result<ExpressionMatrix> {
    if mask.is_empty() {
        return Err(Error::EmptySelection);
    }
    for &i in &mask.kept_indices {
        if i >= matrix.n_genes() {
            return Err(Error::IndexOutOfRange { index: i, len: matrix.n_genes() });
        }
    }
    let gene_ids = mask
        .kept_indices
        .iter()
        .map(|&i| matrix.gene_ids()[i].clone())
        .collect();
    let values = matrix.values().select(ndarray::Axis(1), &mask.kept_indices);
    matrix.with_values(gene_ids, values)
}

/// Writes the per-feature score table: `feature_index,gene_id,f_stat,p_value,kept`.
pub fn write_scores_csv<W: Write>(
    scores: &[FeatureScore],
    mask: &SelectionMask,
    gene_ids: &[String],
    mut w: W,
) -> Result<()> {
    let to_io = |e: std::io::Error| Error::io("<scores>", e);
    writeln!(w, "feature_index,gene_id,f_stat,p_value,kept").map_err(to_io)?;
    let mut kept_iter = mask.kept_indices.iter().peekable();
    for s in scores {
        let kept = kept_iter.peek() == Some(&&s.feature_index);
        if kept {
            kept_iter.next();
        }
        writeln!(
            w,
            "{},{},{},{},{}",
            s.feature_index, gene_ids[s.feature_index], s.f_stat, s.p_value, kept
        )
        .map_err(to_io)?;
    }
    Ok(())
}
