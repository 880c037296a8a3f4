//! The train / tune / evaluate / classify / scan workflows behind `dlpc`.
//!
//! Each command returns its results and writes its primary output files.
//! Output files carry no timestamps, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bundle::{self, ModelBundle};
use crate::error::{Error, Result, StageExt};
use crate::evaluate::{self, MetricReport};
use crate::ingest::{self, ClassLabel, Corpus};
use crate::policy::{self, Action, PolicyConfig, ScanVerdict};
use crate::preprocess;
use crate::tune::{self, ParamGrid, TrainingData, TuneResult};
use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOCKED: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub const BUNDLE_FILE: &str = "bundle.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const TUNE_RESULT_FILE: &str = "tune_result.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// One compact JSON document per line.
pub fn to_json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    Ok(text)
}

fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

fn load_training_corpus(manifest: &Path) -> Result<Corpus> {
    let corpus = ingest::load_corpus(manifest).stage("ingest")?;
    if corpus.label_set().len() < 2 {
        return Err(Error::SingleClass(corpus.label_set().len()).in_stage("ingest"));
    }
    Ok(corpus)
}

/// Confusion-matrix report of `bundle` on a labelled corpus.
pub fn evaluate_bundle(bundle: &ModelBundle, corpus: &Corpus) -> Result<MetricReport> {
    if let Some(unknown) = corpus.label_set().iter().find(|l| !bundle.labels.contains(l)) {
        return Err(Error::UnknownLabel(unknown.to_string()).in_stage("evaluate"));
    }
    let texts: Vec<&str> = corpus.documents().iter().map(|d| d.raw_text.as_str()).collect();
    let predictions = bundle.predict_texts(&texts)?;
    let y_true: Vec<ClassLabel> = corpus.documents().iter().map(|d| d.label.clone()).collect();
    let y_pred: Vec<ClassLabel> = predictions.iter().map(|p| bundle.label(p.class_index).clone()).collect();
    let cm = evaluate::confusion(&y_true, &y_pred, &bundle.labels).stage("evaluate")?;
    evaluate::full_report(&cm).stage("evaluate")
}

fn write_report(report: &MetricReport, out_dir: &Path) -> Result<()> {
    write_file(&out_dir.join(REPORT_JSON), &to_json_pretty(report)?)?;
    write_file(&out_dir.join(REPORT_TEXT), &evaluate::render_text(report))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub report: MetricReport,
    pub bundle_path: PathBuf,
}

/// Splits the corpus, fits on the training side with the configured
/// parameters and reports on the held-out side.
pub fn cmd_train(manifest: &Path, config: &RunConfig, out_dir: &Path) -> Result<TrainOutput> {
    config.validate()?;
    let corpus = load_training_corpus(manifest)?;
    let (train, test) = ingest::split_train_test(&corpus, config.test_fraction, config.seed).stage("split")?;
    let preprocess = config.preprocess_config().stage("preprocess")?;
    let bundle = ModelBundle::train(&train, &preprocess, &config.params).stage("train")?;
    let report = evaluate_bundle(&bundle, &test)?;
    prepare_out_dir(out_dir)?;
    let bundle_path = out_dir.join(BUNDLE_FILE);
    bundle::save_bundle(&bundle, &bundle_path)?;
    write_report(&report, out_dir)?;
    Ok(TrainOutput {
        bundle,
        report,
        bundle_path,
    })
}

#[derive(Debug, Clone)]
pub struct TuneOutput {
    pub result: TuneResult,
    pub bundle: ModelBundle,
    pub bundle_path: PathBuf,
}

/// Randomized search with stratified k-fold CV over the whole corpus, then a
/// refit on all of it with the winning parameters.
pub fn cmd_tune(manifest: &Path, grid: &ParamGrid, config: &RunConfig, out_dir: &Path) -> Result<TuneOutput> {
    config.validate()?;
    let corpus = load_training_corpus(manifest)?;
    let preprocess = config.preprocess_config().stage("preprocess")?;
    let data = TrainingData {
        docs: preprocess::preprocess_all(corpus.documents(), &preprocess)
            .into_iter()
            .map(|d| d.tokens)
            .collect(),
        y: corpus.label_indices(),
        labels: corpus.label_set().to_vec(),
    };
    let folds = tune::stratified_kfold(&data.y, &data.labels, config.n_splits, config.seed).stage("tune")?;
    let result =
        tune::randomized_search(&data, grid, &config.params, config.n_candidates, &folds, config.seed).stage("tune")?;
    let best = tune::apply_assignment(&config.params, &result.best_params)?;
    let bundle = ModelBundle::train(&corpus, &preprocess, &best).stage("refit")?;
    prepare_out_dir(out_dir)?;
    write_file(&out_dir.join(TUNE_RESULT_FILE), &to_json_pretty(&result)?)?;
    let bundle_path = out_dir.join(BUNDLE_FILE);
    bundle::save_bundle(&bundle, &bundle_path)?;
    Ok(TuneOutput {
        result,
        bundle,
        bundle_path,
    })
}

pub fn cmd_evaluate(bundle_path: &Path, manifest: &Path, out_dir: &Path) -> Result<MetricReport> {
    let bundle = bundle::load_bundle(bundle_path)?;
    let corpus = ingest::load_corpus(manifest).stage("ingest")?;
    let report = evaluate_bundle(&bundle, &corpus)?;
    prepare_out_dir(out_dir)?;
    write_report(&report, out_dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub path: String,
    pub label: ClassLabel,
    pub probabilities: BTreeMap<ClassLabel, f64>,
    pub unknown_tokens: usize,
    pub zero_vector: bool,
    pub replaced_sequences: usize,
}

pub fn cmd_classify(bundle_path: &Path, paths: &[PathBuf]) -> Result<Vec<Classification>> {
    let bundle = bundle::load_bundle(bundle_path)?;
    paths
        .iter()
        .map(|path| {
            let (text, replaced_sequences) = ingest::read_text_lossy(path)?;
            let p = bundle.predict_text(&text)?;
            Ok(Classification {
                path: path.display().to_string(),
                label: bundle.label(p.class_index).clone(),
                probabilities: bundle.labels.iter().cloned().zip(p.probabilities).collect(),
                unknown_tokens: p.unknown_tokens,
                zero_vector: p.zero_vector,
                replaced_sequences,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub path: String,
    #[serde(flatten)]
    pub verdict: ScanVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub records: Vec<ScanRecord>,
    /// [`EXIT_BLOCKED`] when any verdict is Block, else [`EXIT_OK`].
    pub exit_code: i32,
}

pub fn cmd_scan(bundle_path: &Path, policy: &PolicyConfig, paths: &[PathBuf]) -> Result<ScanOutput> {
    let bundle = bundle::load_bundle(bundle_path)?;
    policy.check_labels(&bundle.labels).stage("policy")?;
    let records = paths
        .iter()
        .map(|path| {
            let (text, _) = ingest::read_text_lossy(path)?;
            Ok(ScanRecord {
                path: path.display().to_string(),
                verdict: policy::scan_document(&bundle, &text, policy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let blocked = records.iter().any(|r| r.verdict.action == Action::Block);
    Ok(ScanOutput {
        records,
        exit_code: if blocked { EXIT_BLOCKED } else { EXIT_OK },
    })
}
