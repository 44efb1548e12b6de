//! One function per subcommand. Each resolves its config, runs the core
//! routine, writes outputs under the output directory, and prints a short
//! result line to stdout.

use std::time::Instant;

use exprstage::augment::{
    gaussian_expand, sfa, smote, AugmentKind, NoiseParams, ProvenanceRecord, SFAParams,
    SmoteParams, SmoteTarget,
};
use exprstage::config::{AugmentationConfig, TransformConfig};
use exprstage::data::{split, write_expression_matrix, LabeledDataset};
use exprstage::error::{Error, Result};
use exprstage::eval::metrics::round2;
use exprstage::pipeline::{
    append_sfa_rows, cross_validate, fit_pipeline, repeated_trials, EvalOutcome, TransformModel,
};
use exprstage::report::{
    read_pipeline_json, write_confusion_csv, write_cv_table_csv, write_manifest_json,
    write_pipeline_json, write_summary_json, write_trials_csv, RunManifest,
};
use exprstage::rng::{derive_indexed, stream};
use exprstage::select::{anova_f_classif, project, select_fpr, write_scores_csv};
use exprstage::stats::{
    deg_analysis, write_deg_summary_json, write_volcano_csv, TTestKind,
};
use exprstage::transform::{ica_fit, pca_fit, ICAParams};

use crate::args::{
    AugmentArgs, AugmentMethodArg, CvArgs, DataArgs, DegArgs, EvalArgs, ModelArgs, PredictArgs,
    SelectArgs, TransformArgs, TransformMethodArg, TrialsArgs,
};
use crate::resolve::{apply_model_flags, load_dataset, resolve_config, OutDir};

fn class_summary(data: &LabeledDataset) -> String {
    let counts = data.class_counts();
    format!(
        "{} samples x {} genes ({} early, {} late)",
        data.n_samples(),
        data.matrix().n_genes(),
        counts[0],
        counts[1]
    )
}

pub fn run_validate(args: &DataArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let data = load_dataset(&config)?;
    println!("ok: {}", class_summary(&data));
    Ok(())
}

pub fn run_deg(args: &DegArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let data = load_dataset(&config)?;
    let mut params = config.deg.clone().unwrap_or_default();
    if let Some(alpha) = args.alpha {
        params.alpha = alpha;
    }
    if let Some(lfc) = args.lfc {
        params.lfc_threshold = lfc;
    }
    if args.welch {
        params.kind = TTestKind::Welch;
    }
    let table = deg_analysis(&data, &params)?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("volcano.csv", |w| write_volcano_csv(&table, w))?;
    out.write("deg_summary.json", |w| write_deg_summary_json(&table, w))?;
    let s = table.summary();
    println!(
        "deg: {} up, {} down, {} not significant -> {}",
        s.up,
        s.down,
        s.ns,
        out.path().display()
    );
    Ok(())
}

pub fn run_select(args: &SelectArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let data = load_dataset(&config)?;
    let alpha = args
        .alpha
        .or_else(|| config.selection.as_ref().map(|s| s.alpha))
        .unwrap_or(0.05);
    let scores = anova_f_classif(&data)?;
    let mask = select_fpr(&scores, alpha)?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("feature_scores.csv", |w| {
        write_scores_csv(&scores, &mask, data.matrix().gene_ids(), w)
    })?;
    let selected = project(data.matrix(), &mask)?;
    out.write("selected_matrix.tsv", |w| write_expression_matrix(&selected, w))?;
    println!(
        "select: kept {} of {} features at alpha {} -> {}",
        mask.len(),
        data.matrix().n_genes(),
        alpha,
        out.path().display()
    );
    Ok(())
}

pub fn run_transform(args: &TransformArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let data = load_dataset(&config)?;
    // Flags win; a config transform block is the fallback.
    let model = match (args.method, &config.transform) {
        (Some(method), _) => {
            let n_components = args.components.ok_or_else(|| {
                Error::Config("--components is required with --method".into())
            })?;
            match method {
                TransformMethodArg::Pca => TransformModel::Pca(pca_fit(data.x(), n_components)?),
                TransformMethodArg::Ica => TransformModel::Ica(ica_fit(
                    data.x(),
                    &ICAParams {
                        n_components,
                        max_iter: args.max_iter.unwrap_or(200),
                        tol: args.tol.unwrap_or(1e-4),
                        seed: config.seed,
                    },
                )?),
            }
        }
        (None, TransformConfig::Pca { n_components }) => {
            TransformModel::Pca(pca_fit(data.x(), *n_components)?)
        }
        (None, TransformConfig::Ica { n_components, max_iter, tol }) => {
            TransformModel::Ica(ica_fit(
                data.x(),
                &ICAParams {
                    n_components: *n_components,
                    max_iter: *max_iter,
                    tol: *tol,
                    seed: config.seed,
                },
            )?)
        }
        (None, TransformConfig::None) => {
            return Err(Error::Config(
                "no transform given: pass --method or a config with a transform block".into(),
            ))
        }
    };
    let transformed = model.transform(data.x())?;
    let names = (1..=model.n_components())
        .map(|i| format!("{}{}", model.feature_prefix(), i))
        .collect();
    let matrix = data.matrix().with_values(names, transformed)?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("transformed.tsv", |w| write_expression_matrix(&matrix, w))?;
    out.write("transform_model.json", |w| {
        let text = serde_json::to_string_pretty(&model)?;
        w.extend_from_slice(text.as_bytes());
        w.push(b'\n');
        Ok(())
    })?;
    println!(
        "transform: {} components -> {}",
        model.n_components(),
        out.path().display()
    );
    Ok(())
}

pub fn run_augment(args: &AugmentArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let data = load_dataset(&config)?;
    let seed = config.seed;

    let sfa_rows = |params: SFAParams| -> Result<_> {
        let extra = sfa(data.x(), &params, seed)?;
        let dataset = append_sfa_rows(&data, extra)?;
        let provenance = (0..data.n_samples())
            .map(|i| ProvenanceRecord {
                kind: AugmentKind::Sfa,
                base_row: i,
                neighbor_row: None,
                delta_or_sigma: params.sigma1,
            })
            .collect::<Vec<_>>();
        Ok((dataset, provenance, Vec::new()))
    };

    // Flags win; a config augmentation block is the fallback.
    let (dataset, provenance, warnings) = match (args.method, &config.augmentation) {
        (Some(AugmentMethodArg::Smote), _) => {
            let target = match args.ratio {
                Some(r) => SmoteTarget::Ratio(r),
                None => SmoteTarget::BalanceToMajority,
            };
            let k_neighbors = args.k_neighbors.unwrap_or(5);
            let aug = smote(&data, &SmoteParams { k_neighbors, target, seed })?;
            (aug.dataset, aug.provenance, aug.warnings)
        }
        (Some(AugmentMethodArg::Sfa), _) => sfa_rows(SFAParams {
            mu: args.mu.unwrap_or(1.0),
            sigma1: args.sigma1.unwrap_or(0.1),
            sigma2: args.sigma2.unwrap_or(0.1),
        })?,
        (Some(AugmentMethodArg::Gaussian), _) => {
            let params = NoiseParams {
                mu: args.mu.unwrap_or(0.0),
                sigma: args.sigma.unwrap_or(0.01),
                relative: !args.absolute,
                factor: args.factor.unwrap_or(10),
            };
            let aug = gaussian_expand(&data, &params, seed)?;
            (aug.dataset, aug.provenance, aug.warnings)
        }
        (None, AugmentationConfig::Smote { k_neighbors, target }) => {
            let params = SmoteParams { k_neighbors: *k_neighbors, target: *target, seed };
            let aug = smote(&data, &params)?;
            (aug.dataset, aug.provenance, aug.warnings)
        }
        (None, AugmentationConfig::Sfa { mu, sigma1, sigma2 }) => {
            sfa_rows(SFAParams { mu: *mu, sigma1: *sigma1, sigma2: *sigma2 })?
        }
        (None, AugmentationConfig::Gaussian { mu, sigma, relative, factor }) => {
            let params =
                NoiseParams { mu: *mu, sigma: *sigma, relative: *relative, factor: *factor };
            let aug = gaussian_expand(&data, &params, seed)?;
            (aug.dataset, aug.provenance, aug.warnings)
        }
        (None, AugmentationConfig::None) => {
            return Err(Error::Config(
                "no augmentation given: pass --method or a config with an augmentation block"
                    .into(),
            ))
        }
    };

    let out = OutDir::create(&config.output_dir)?;
    out.write("augmented.tsv", |w| write_expression_matrix(dataset.matrix(), w))?;
    out.write("augmented_labels.tsv", |w| {
        for (id, label) in dataset.matrix().sample_ids().iter().zip(dataset.labels()) {
            w.extend_from_slice(format!("{id}\t{label}\n").as_bytes());
        }
        Ok(())
    })?;
    out.write("provenance.csv", |w| {
        w.extend_from_slice(b"kind,base_row,neighbor_row,delta_or_sigma\n");
        for p in &provenance {
            let neighbor = p.neighbor_row.map(|i| i.to_string()).unwrap_or_default();
            w.extend_from_slice(
                format!("{},{},{},{}\n", p.kind, p.base_row, neighbor, p.delta_or_sigma)
                    .as_bytes(),
            );
        }
        Ok(())
    })?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "augment: {} -> {} samples -> {}",
        data.n_samples(),
        dataset.n_samples(),
        out.path().display()
    );
    Ok(())
}

pub fn run_train(args: &ModelArgs) -> Result<()> {
    let mut config = resolve_config(&args.common)?;
    apply_model_flags(&mut config, &args.classifier, &args.grid)?;
    config.model.validate()?;
    let data = load_dataset(&config)?;
    let pipeline = fit_pipeline(&config, &data, config.seed)?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("pipeline.json", |w| write_pipeline_json(&pipeline, w))?;
    println!(
        "train: fitted {} on {} -> {}",
        pipeline.spec.kind_name(),
        class_summary(&data),
        out.path().display()
    );
    Ok(())
}

pub fn run_predict(args: &PredictArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| Error::io(args.model.display().to_string(), e))?;
    let pipeline = read_pipeline_json(&text)?;
    let options = exprstage::data::ParseOptions {
        delimiter: b'\t',
        orientation: args.orientation.map(Into::into).unwrap_or_default(),
        log_transform: args.log2,
    };
    let matrix = exprstage::data::read_expression_matrix(&args.matrix, &options)?;
    let predictions = pipeline.predict(&matrix)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| std::path::PathBuf::from("out"));
    let out = OutDir::create(out_dir)?;
    out.write("predictions.csv", |w| {
        w.extend_from_slice(b"sample_id,predicted\n");
        for (id, label) in matrix.sample_ids().iter().zip(&predictions) {
            w.extend_from_slice(format!("{id},{label}\n").as_bytes());
        }
        Ok(())
    })?;
    println!(
        "predict: {} samples with {} -> {}",
        matrix.n_samples(),
        pipeline.spec.kind_name(),
        out.path().display()
    );
    Ok(())
}

pub fn run_grid(args: &ModelArgs) -> Result<()> {
    let mut config = resolve_config(&args.common)?;
    apply_model_flags(&mut config, &args.classifier, &args.grid)?;
    config.model.validate()?;
    if config.model.grid.is_none() {
        return Err(Error::Config(
            "the grid command needs a grid: pass --grid or a config with a model.grid block"
                .into(),
        ));
    }
    let data = load_dataset(&config)?;
    let pipeline = fit_pipeline(&config, &data, config.seed)?;
    let table = pipeline
        .grid_table
        .as_deref()
        .ok_or(Error::EmptyResults("grid search produced no table"))?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("cv_table.csv", |w| write_cv_table_csv(table, w))?;
    out.write("best_spec.json", |w| {
        let text = serde_json::to_string_pretty(&pipeline.spec)?;
        w.extend_from_slice(text.as_bytes());
        w.push(b'\n');
        Ok(())
    })?;
    out.write("pipeline.json", |w| write_pipeline_json(&pipeline, w))?;
    let best = pipeline.best_index.unwrap_or(0);
    println!(
        "grid: {} candidates, best #{} ({}) mean weighted F1 {:.2} -> {}",
        table.len(),
        best,
        pipeline.spec.kind_name(),
        round2(table[best].mean_weighted_f1),
        out.path().display()
    );
    Ok(())
}

pub fn run_evaluate(args: &EvalArgs) -> Result<()> {
    let mut config = resolve_config(&args.model.common)?;
    apply_model_flags(&mut config, &args.model.classifier, &args.model.grid)?;
    config.model.validate()?;
    if let Some(f) = args.test_fraction {
        config.evaluation.test_fraction = f;
    }
    let data = load_dataset(&config)?;
    let pair = split(&data, config.evaluation.test_fraction, true, config.seed)?;
    let pipeline = fit_pipeline(&config, &pair.train, config.seed)?;
    let outcome = pipeline.evaluate(&pair.test)?;
    let out = OutDir::create(&config.output_dir)?;
    write_eval_outputs(&out, &pair.test, &outcome)?;
    out.write("pipeline.json", |w| write_pipeline_json(&pipeline, w))?;
    println!(
        "evaluate: weighted F1 {:.2} on {} held-out samples -> {}",
        round2(outcome.report.weighted_f1),
        pair.test.n_samples(),
        out.path().display()
    );
    Ok(())
}

fn write_eval_outputs(out: &OutDir, test: &LabeledDataset, outcome: &EvalOutcome) -> Result<()> {
    out.write("confusion.csv", |w| write_confusion_csv(&outcome.confusion, w))?;
    out.write("predictions.csv", |w| {
        w.extend_from_slice(b"sample_id,actual,predicted\n");
        for ((id, actual), predicted) in test
            .matrix()
            .sample_ids()
            .iter()
            .zip(test.labels())
            .zip(&outcome.predictions)
        {
            w.extend_from_slice(format!("{id},{actual},{predicted}\n").as_bytes());
        }
        Ok(())
    })?;
    out.write("metrics.json", |w| {
        let r = &outcome.report;
        let per_class: Vec<_> = r
            .per_class
            .iter()
            .zip(["early", "late"])
            .map(|(c, name)| {
                serde_json::json!({
                    "class": name,
                    "precision": round2(c.precision),
                    "recall": round2(c.recall),
                    "f1": round2(c.f1),
                    "support": c.support,
                })
            })
            .collect();
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "accuracy": round2(outcome.confusion.accuracy()),
            "weighted_precision": round2(r.weighted_precision),
            "weighted_recall": round2(r.weighted_recall),
            "weighted_f1": round2(r.weighted_f1),
            "degenerate": r.degenerate,
            "per_class": per_class,
        }))?;
        w.extend_from_slice(text.as_bytes());
        w.push(b'\n');
        Ok(())
    })?;
    Ok(())
}

pub fn run_cv(args: &CvArgs) -> Result<()> {
    let mut config = resolve_config(&args.model.common)?;
    apply_model_flags(&mut config, &args.model.classifier, &args.model.grid)?;
    config.model.validate()?;
    let k = args.folds.unwrap_or(config.evaluation.cv_folds);
    let data = load_dataset(&config)?;
    let outcome = cross_validate(&config, &data, k, config.seed)?;
    let out = OutDir::create(&config.output_dir)?;
    out.write("cv_scores.csv", |w| {
        w.extend_from_slice(b"fold,weighted_f1,single_class_train\n");
        for fold in &outcome.folds {
            w.extend_from_slice(
                format!("{},{},{}\n", fold.fold, fold.weighted_f1, fold.single_class_train)
                    .as_bytes(),
            );
        }
        Ok(())
    })?;
    out.write("cv_summary.json", |w| {
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "folds": outcome.folds.len(),
            "mean_weighted_f1": round2(outcome.mean_weighted_f1),
        }))?;
        w.extend_from_slice(text.as_bytes());
        w.push(b'\n');
        Ok(())
    })?;
    println!(
        "cv: {} folds, mean weighted F1 {:.2} -> {}",
        outcome.folds.len(),
        round2(outcome.mean_weighted_f1),
        out.path().display()
    );
    Ok(())
}

pub fn run_trials(args: &TrialsArgs) -> Result<()> {
    let mut config = resolve_config(&args.model.common)?;
    apply_model_flags(&mut config, &args.model.classifier, &args.model.grid)?;
    config.model.validate()?;
    if let Some(f) = args.test_fraction {
        config.evaluation.test_fraction = f;
    }
    let n_runs = args.runs.unwrap_or(config.evaluation.n_runs);
    let data = load_dataset(&config)?;
    let summary = repeated_trials(&config, &data, n_runs, config.seed)?;
    let algorithm = config.model.kind_name().to_string();
    let out = OutDir::create(&config.output_dir)?;
    out.write("trials.csv", |w| write_trials_csv(&algorithm, &summary, w))?;
    out.write("summary.json", |w| write_summary_json(&[(&algorithm, &summary)], w))?;
    println!(
        "trials: {} runs of {}, weighted F1 mean {:.2} best {:.2} -> {}",
        summary.n_runs,
        algorithm,
        round2(summary.f1.mean),
        round2(summary.f1.best),
        out.path().display()
    );
    Ok(())
}

/// Full protocol: repeated trials for the headline numbers, then a replay
/// of run 0 for inspectable detail outputs (confusion, predictions, the
/// fitted pipeline, and the grid table when one was searched). Everything
/// except manifest.json is a pure function of config + seed.
pub fn run_pipeline(args: &ModelArgs) -> Result<()> {
    let started = Instant::now();
    let mut config = resolve_config(&args.common)?;
    apply_model_flags(&mut config, &args.classifier, &args.grid)?;
    config.model.validate()?;
    let out = OutDir::create(&config.output_dir)?;
    let mut manifest =
        RunManifest::start(env!("CARGO_PKG_VERSION"), config.hash_hex()?, config.seed);
    out.write("manifest.json", |w| write_manifest_json(&manifest, w))?;

    let mut outputs = vec![out.write("resolved_config.json", |w| {
        w.extend_from_slice(config.to_canonical_json()?.as_bytes());
        w.push(b'\n');
        Ok(())
    })?];

    let data = load_dataset(&config)?;
    manifest.record_stage("ingest", started.elapsed().as_millis() as u64);

    if let Some(deg_params) = &config.deg {
        let stage = Instant::now();
        let table = deg_analysis(&data, deg_params)?;
        outputs.push(out.write("volcano.csv", |w| write_volcano_csv(&table, w))?);
        outputs.push(out.write("deg_summary.json", |w| write_deg_summary_json(&table, w))?);
        manifest.record_stage("deg", stage.elapsed().as_millis() as u64);
    }

    let stage = Instant::now();
    let summary = repeated_trials(&config, &data, config.evaluation.n_runs, config.seed)?;
    manifest.record_stage("trials", stage.elapsed().as_millis() as u64);
    let algorithm = config.model.kind_name().to_string();
    outputs.push(out.write("trials.csv", |w| write_trials_csv(&algorithm, &summary, w))?);
    outputs.push(out.write("summary.json", |w| {
        write_summary_json(&[(&algorithm, &summary)], w)
    })?);

    let stage = Instant::now();
    let run0_seed = derive_indexed(config.seed, stream::TRIAL, 0);
    let pair = split(&data, config.evaluation.test_fraction, true, run0_seed)?;
    let pipeline = fit_pipeline(&config, &pair.train, run0_seed)?;
    let outcome = pipeline.evaluate(&pair.test)?;
    write_eval_outputs(&out, &pair.test, &outcome)?;
    outputs.push(out.path().join("confusion.csv"));
    outputs.push(out.path().join("predictions.csv"));
    outputs.push(out.path().join("metrics.json"));
    outputs.push(out.write("pipeline.json", |w| write_pipeline_json(&pipeline, w))?);
    if let Some(table) = pipeline.grid_table.as_deref() {
        outputs.push(out.write("cv_table.csv", |w| write_cv_table_csv(table, w))?);
    }
    manifest.record_stage("detail", stage.elapsed().as_millis() as u64);

    for path in &outputs {
        manifest.add_output(path.display().to_string());
    }
    manifest.finish();
    out.write("manifest.json", |w| write_manifest_json(&manifest, w))?;
    println!(
        "pipeline: {} runs of {}, weighted F1 mean {:.2} best {:.2} -> {}",
        summary.n_runs,
        algorithm,
        round2(summary.f1.mean),
        round2(summary.f1.best),
        out.path().display()
    );
    Ok(())
}
