//! Confusion matrix and support-weighted classification metrics.
//!
//! All metric values are percentages in [0, 100]. Weighted averages use
//! class support as the weight, which makes weighted recall coincide with
//! accuracy.

use serde::{Deserialize, Serialize};

use crate::data::StageLabel;
use crate::error::{Error, Result};

/// 2x2 contingency table indexed (actual, predicted) in label order
/// (Early, Late).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_labels(y_true: &[StageLabel], y_pred: &[StageLabel]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch {
                left: y_true.len(),
                right: y_pred.len(),
            });
        }
        if y_true.is_empty() {
            return Err(Error::EmptyInput("confusion matrix labels"));
        }
        let mut counts = [[0usize; 2]; 2];
        for (t, p) in y_true.iter().zip(y_pred) {
            counts[t.index()][p.index()] += 1;
        }
        Ok(Self { counts })
    }

    pub fn count(&self, actual: StageLabel, predicted: StageLabel) -> usize {
        self.counts[actual.index()][predicted.index()]
    }

    pub fn counts(&self) -> &[[usize; 2]; 2] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Row sum: how many samples truly belong to `label`.
    pub fn support(&self, label: StageLabel) -> usize {
        self.counts[label.index()].iter().sum()
    }

    /// Percent of samples on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let correct = self.counts[0][0] + self.counts[1][1];
        100.0 * correct as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class and support-weighted precision/recall/F1, as percentages.
///
/// `degenerate` is set when any ratio had a zero denominator (empty
/// predicted class, empty true class, or precision + recall == 0); the
/// affected value is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class: [ClassMetrics; 2],
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub degenerate: bool,
}

/// Ratio as a percentage; zero denominator counts as degenerate and maps
/// to 0 so downstream averaging stays finite.
fn percent(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        100.0 * num / den
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricReport {
    let c = cm.counts();
    let mut degenerate = false;
    let mut per_class = Vec::with_capacity(2);
    for label in StageLabel::ALL {
        let i = label.index();
        let tp = c[i][i] as f64;
        let predicted = (c[0][i] + c[1][i]) as f64;
        let support = cm.support(label);
        let precision = percent(tp, predicted, &mut degenerate);
        let recall = percent(tp, support as f64, &mut degenerate);
        let f1 = if precision + recall == 0.0 {
            degenerate = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let total = cm.total() as f64;
    let weight = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / total
    };
    MetricReport {
        weighted_precision: weight(|m| m.precision),
        weighted_recall: weight(|m| m.recall),
        weighted_f1: weight(|m| m.f1),
        per_class: [per_class[0].clone(), per_class[1].clone()],
        degenerate,
    }
}

/// Round to two decimals for report output; internal comparisons stay at
/// full precision.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
