//! Per-gene differential expression between early and late stages:
//! two-sample t-tests, log2 fold changes, and volcano/summary exports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, StageLabel};
use crate::error::{Error, Result};
use crate::special::student_t_two_sided_p;

/// Smallest p-value reported; keeps -log10(p) finite for volcano plots.
pub const P_FLOOR: f64 = 1e-300;

/// Variance assumption for the two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sample t-test of `a` against `b` (statistic sign follows mean(a) - mean(b)).
///
/// Degenerate inputs are given closed-form answers instead of NaN: equal
/// means with zero spread score t = 0, p = 1; distinct means with zero
/// spread score |t| = f64::MAX, p = `P_FLOOR`.
pub fn two_sample_t(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult> {
    for (name, g) in [("a", a), ("b", b)] {
        if g.len() < 2 {
            return Err(Error::GroupTooSmall {
                context: if name == "a" { "t-test group a" } else { "t-test group b" },
                required: 2,
                found: g.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_and_var(a);
    let (mean_b, var_b) = mean_and_var(b);
    let diff = mean_a - mean_b;

    let (se, df) = match kind {
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        TTestKind::Welch => {
            let (ta, tb) = (var_a / na, var_b / nb);
            let df = (ta + tb) * (ta + tb)
                / (ta * ta / (na - 1.0) + tb * tb / (nb - 1.0));
            ((ta + tb).sqrt(), df)
        }
    };

    if se == 0.0 || !se.is_finite() || !df.is_finite() {
        return Ok(if diff == 0.0 {
            TTestResult { t: 0.0, df: na + nb - 2.0, p: 1.0 }
        } else {
            TTestResult {
                t: f64::MAX.copysign(diff),
                df: na + nb - 2.0,
                p: P_FLOOR,
            }
        });
    }

    let t = diff / se;
    let p = student_t_two_sided_p(t, df).max(P_FLOOR);
    Ok(TTestResult { t, df, p })
}

/// log2((case + pseudocount) / (reference + pseudocount)).
///
/// Means are of non-negative ingestion-space values, so the pseudocount
/// keeps both sides positive.
pub fn log2_fold_change(reference_mean: f64, case_mean: f64, pseudocount: f64) -> f64 {
    ((case_mean + pseudocount) / (reference_mean + pseudocount)).log2()
}

/// Direction call for one gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DEGStatus {
    Up,
    Down,
    Ns,
}

impl std::fmt::Display for DEGStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DEGStatus::Up => f.write_str("up"),
            DEGStatus::Down => f.write_str("down"),
            DEGStatus::Ns => f.write_str("ns"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DEGParams {
    pub alpha: f64,
    pub lfc_threshold: f64,
    pub kind: TTestKind,
    pub pseudocount: f64,
}

impl Default for DEGParams {
    fn default() -> Self {
        DEGParams {
            alpha: 0.05,
            lfc_threshold: 1.0,
            kind: TTestKind::Pooled,
            pseudocount: 1e-9,
        }
    }
}

impl DEGParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha".into(),
                reason: format!("{} outside (0, 1)", self.alpha),
            });
        }
        if !(self.lfc_threshold >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lfc_threshold".into(),
                reason: format!("{} is negative", self.lfc_threshold),
            });
        }
        if !(self.pseudocount > 0.0) {
            return Err(Error::InvalidParameter {
                name: "pseudocount".into(),
                reason: format!("{} must be positive", self.pseudocount),
            });
        }
        Ok(())
    }
}

/// One gene's differential-expression row. Fold change is late over early.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DEGRecord {
    pub gene_id: String,
    pub index: usize,
    pub mean_early: f64,
    pub mean_late: f64,
    pub log2fc: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub neg_log10_p: f64,
    pub status: DEGStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEGSummary {
    pub up: usize,
    pub down: usize,
    pub ns: usize,
    pub alpha: f64,
    pub lfc_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct DEGTable {
    pub records: Vec<DEGRecord>,
    pub params: DEGParams,
}

impl DEGTable {
    pub fn summary(&self) -> DEGSummary {
        let mut up = 0;
        let mut down = 0;
        let mut ns = 0;
        for r in &self.records {
            match r.status {
                DEGStatus::Up => up += 1,
                DEGStatus::Down => down += 1,
                DEGStatus::Ns => ns += 1,
            }
        }
        DEGSummary {
            up,
            down,
            ns,
            alpha: self.params.alpha,
            lfc_threshold: self.params.lfc_threshold,
        }
    }
}

/// Tests every gene for differential expression between the two stages.
///
/// A gene is up when p < alpha and log2fc >= lfc_threshold, down when
/// p < alpha and log2fc <= -lfc_threshold, and ns otherwise.
pub fn deg_analysis(dataset: &LabeledDataset, params: &DEGParams) -> Result<DEGTable> {
    params.validate()?;
    let early = dataset.class_indices(StageLabel::Early);
    let late = dataset.class_indices(StageLabel::Late);
    if early.is_empty() || late.is_empty() {
        return Err(Error::SingleClass("differential expression"));
    }
    for (ctx, g) in [("early group", &early), ("late group", &late)] {
        if g.len() < 2 {
            return Err(Error::GroupTooSmall { context: ctx, required: 2, found: g.len() });
        }
    }

    let x = dataset.x();
    let gene_ids = dataset.matrix().gene_ids();
    let records: Result<Vec<DEGRecord>> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let a: Vec<f64> = late.iter().map(|&i| col[i]).collect();
            let b: Vec<f64> = early.iter().map(|&i| col[i]).collect();
            let test = two_sample_t(&a, &b, params.kind)?;
            let mean_late = a.iter().sum::<f64>() / a.len() as f64;
            let mean_early = b.iter().sum::<f64>() / b.len() as f64;
            let log2fc = log2_fold_change(mean_early, mean_late, params.pseudocount);
            let status = if test.p < params.alpha && log2fc >= params.lfc_threshold {
                DEGStatus::Up
            } else if test.p < params.alpha && log2fc <= -params.lfc_threshold {
                DEGStatus::Down
            } else {
                DEGStatus::Ns
            };
            Ok(DEGRecord {
                gene_id: gene_ids[j].clone(),
                index: j,
                mean_early,
                mean_late,
                log2fc,
                t: test.t,
                df: test.df,
                p: test.p,
                neg_log10_p: -test.p.max(P_FLOOR).log10(),
                status,
            })
        })
        .collect();

    Ok(DEGTable { records: records?, params: params.clone() })
}

/// Writes the volcano-plot table: `gene_id,log2fc,neg_log10_p,status`.
pub fn write_volcano_csv<W: Write>(table: &DEGTable, mut w: W) -> Result<()> {
    let to_io = |e: std::io::Error| Error::io("<volcano>", e);
    writeln!(w, "gene_id,log2fc,neg_log10_p,status").map_err(to_io)?;
    for r in &table.records {
        writeln!(w, "{},{},{},{}", r.gene_id, r.log2fc, r.neg_log10_p, r.status)
            .map_err(to_io)?;
    }
    Ok(())
}

/// Writes the up/down/ns counts as JSON.
pub fn write_deg_summary_json<W: Write>(table: &DEGTable, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &table.summary())?;
    writeln!(w).map_err(|e| Error::io("<deg summary>", e))?;
    Ok(())
}
