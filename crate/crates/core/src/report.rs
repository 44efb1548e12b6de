//! Report writers: long-format trial CSVs, summary JSON, grid tables,
//! confusion matrices, the versioned pipeline dump, and the run manifest.
//!
//! Writers validate before touching the sink, so an error never leaves a
//! partial file behind.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::eval::grid::CandidateResult;
use crate::eval::metrics::{round2, ConfusionMatrix};
use crate::pipeline::{TrainedPipeline, TrialSummary};

const FORMAT_VERSION: u32 = 1;
const CLASSES: [&str; 2] = ["early", "late"];

/// RFC 4180 quoting: wrap when the field holds a comma, quote, or newline.
fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn write_err(path: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Long-format per-run metrics for boxplots: `algorithm,run,metric,value`,
/// three weighted metrics per run.
pub fn write_boxplot_csv<W: Write>(entries: &[(&str, &TrialSummary)], mut w: W) -> Result<()> {
    if entries.is_empty() || entries.iter().all(|(_, s)| s.runs.is_empty()) {
        return Err(Error::EmptyResults("no trial runs to write"));
    }
    let mut out = String::from("algorithm,run,metric,value\n");
    for (algorithm, summary) in entries {
        for run in &summary.runs {
            for (metric, value) in [
                ("precision", run.report.weighted_precision),
                ("recall", run.report.weighted_recall),
                ("f1", run.report.weighted_f1),
            ] {
                out.push_str(&format!(
                    "{},{},{metric},{value}\n",
                    csv_quote(algorithm),
                    run.run
                ));
            }
        }
    }
    w.write_all(out.as_bytes()).map_err(write_err("boxplot csv"))
}

/// Single-algorithm long CSV, one row per (run, metric).
pub fn write_trials_csv<W: Write>(algorithm: &str, summary: &TrialSummary, w: W) -> Result<()> {
    write_boxplot_csv(&[(algorithm, summary)], w)
}

/// Mean and best of each weighted metric per algorithm, rounded to two
/// decimals for table-style reporting.
pub fn write_summary_json<W: Write>(entries: &[(&str, &TrialSummary)], mut w: W) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::EmptyResults("no trial summaries to write"));
    }
    let mut algorithms = serde_json::Map::new();
    for (name, summary) in entries {
        algorithms.insert(
            (*name).to_string(),
            json!({
                "n_runs": summary.n_runs,
                "mean": {
                    "precision": round2(summary.precision.mean),
                    "recall": round2(summary.recall.mean),
                    "f1": round2(summary.f1.mean),
                },
                "best": {
                    "precision": round2(summary.precision.best),
                    "recall": round2(summary.recall.best),
                    "f1": round2(summary.f1.best),
                },
            }),
        );
    }
    let doc = json!({ "algorithms": algorithms });
    let text = serde_json::to_string_pretty(&doc)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(write_err("summary json"))
}

/// Grid-search table, one row per (candidate, fold).
pub fn write_cv_table_csv<W: Write>(table: &[CandidateResult], mut w: W) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyResults("no grid candidates to write"));
    }
    let mut out = String::from("candidate,fold,weighted_f1,degenerate_folds,params\n");
    for candidate in table {
        for (fold, score) in candidate.fold_scores.iter().enumerate() {
            out.push_str(&format!(
                "{},{fold},{score},{},{}\n",
                candidate.index,
                candidate.degenerate_folds,
                csv_quote(&candidate.params_json)
            ));
        }
    }
    w.write_all(out.as_bytes())
        .map_err(write_err("grid table csv"))
}

/// 2x2 confusion counts with explicit axis labels.
pub fn write_confusion_csv<W: Write>(cm: &ConfusionMatrix, mut w: W) -> Result<()> {
    let c = cm.counts();
    let out = format!(
        "actual,predicted_early,predicted_late\nearly,{},{}\nlate,{},{}\n",
        c[0][0], c[0][1], c[1][0], c[1][1]
    );
    w.write_all(out.as_bytes())
        .map_err(write_err("confusion csv"))
}

#[derive(Serialize, Deserialize)]
struct PipelineDump {
    format_version: u32,
    classes: [String; 2],
    pipeline: TrainedPipeline,
}

/// Versioned dump of a fitted pipeline (stages plus model).
pub fn write_pipeline_json<W: Write>(pipeline: &TrainedPipeline, mut w: W) -> Result<()> {
    let dump = PipelineDump {
        format_version: FORMAT_VERSION,
        classes: [CLASSES[0].to_string(), CLASSES[1].to_string()],
        pipeline: pipeline.clone(),
    };
    let text = serde_json::to_string_pretty(&dump)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(write_err("pipeline json"))
}

/// Reload a dump, rejecting unknown versions or class sets.
pub fn read_pipeline_json(text: &str) -> Result<TrainedPipeline> {
    let dump: PipelineDump = serde_json::from_str(text)?;
    if dump.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported pipeline dump version {} (expected {FORMAT_VERSION})",
            dump.format_version
        )));
    }
    if dump.classes[0] != CLASSES[0] || dump.classes[1] != CLASSES[1] {
        return Err(Error::Config(format!(
            "unexpected class set {:?} in pipeline dump",
            dump.classes
        )));
    }
    Ok(dump.pipeline)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageDuration {
    pub stage: String,
    pub millis: u64,
}

/// Provenance record for one run: what configuration produced which
/// outputs, when, and how long each stage took. Written at run start and
/// finalized at the end, so a crash leaves the started stub behind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub stage_durations: Vec<StageDuration>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(tool_version: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        RunManifest {
            tool_version: tool_version.into(),
            config_hash: config_hash.into(),
            seed,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            stage_durations: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_stage(&mut self, stage: impl Into<String>, millis: u64) {
        self.stage_durations.push(StageDuration {
            stage: stage.into(),
            millis,
        });
    }

    pub fn add_output(&mut self, path: impl Into<String>) {
        self.outputs.push(path.into());
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = Some(now_ms());
    }
}

pub fn write_manifest_json<W: Write>(manifest: &RunManifest, mut w: W) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(write_err("manifest json"))
}
