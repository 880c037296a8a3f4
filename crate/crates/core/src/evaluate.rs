//! Confusion matrices and one-vs-rest classification metrics.
//!
//! Rows of a confusion matrix are actual classes, columns are predicted
//! classes. A metric whose denominator is zero is undefined and is reported
//! as `None` rather than 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ClassLabel;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<ClassLabel>,
    /// `counts[actual][predicted]`
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<ClassLabel>) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(labels: Vec<ClassLabel>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                context: "confusion matrix".into(),
                expected: k,
                found: counts.len(),
            });
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn index_of(&self, label: &ClassLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }

    /// Tallies one prediction given class indices.
    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }
}

pub fn confusion(y_true: &[ClassLabel], y_pred: &[ClassLabel], labels: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            context: "predicted labels".into(),
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(labels.to_vec());
    for (a, p) in y_true.iter().zip(y_pred) {
        let (a, p) = (cm.index_of(a)?, cm.index_of(p)?);
        cm.record(a, p);
    }
    Ok(cm)
}

pub fn one_vs_rest(cm: &ConfusionMatrix, positive: &ClassLabel) -> Result<BinaryCounts> {
    let p = cm.index_of(positive)?;
    let tp = cm.counts[p][p];
    let fn_ = cm.counts[p].iter().sum::<u64>() - tp;
    let fp = cm.counts.iter().map(|row| row[p]).sum::<u64>() - tp;
    let tn = cm.total() - tp - fn_ - fp;
    Ok(BinaryCounts { tp, fp, tn, fn_ })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// TP / (TP + FN)
pub fn sensitivity(b: &BinaryCounts) -> Option<f64> {
    ratio(b.tp, b.tp + b.fn_)
}

/// TN / (FP + TN)
pub fn specificity(b: &BinaryCounts) -> Option<f64> {
    ratio(b.tn, b.fp + b.tn)
}

/// TP / (TP + FP)
pub fn precision(b: &BinaryCounts) -> Option<f64> {
    ratio(b.tp, b.tp + b.fp)
}

/// Same quantity as [`sensitivity`].
pub fn recall(b: &BinaryCounts) -> Option<f64> {
    sensitivity(b)
}

/// Harmonic mean `2PR / (P + R)`; undefined when either input is undefined
/// or both are zero.
pub fn f1(b: &BinaryCounts) -> Option<f64> {
    let (p, r) = (precision(b)?, recall(b)?);
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

/// (TP + TN) / total
pub fn accuracy(b: &BinaryCounts) -> Option<f64> {
    ratio(b.tp + b.tn, b.total())
}

/// (FP + FN) / total
pub fn error_rate(b: &BinaryCounts) -> Option<f64> {
    ratio(b.fp + b.fn_, b.total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: ClassLabel,
    pub counts: BinaryCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// One-vs-rest accuracy, (TP + TN) / total for this class.
    pub binary_accuracy: Option<f64>,
    /// One-vs-rest error, (FP + FN) / total for this class.
    pub binary_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAverages {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub total: u64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_average: MacroAverages,
    /// trace / total over all classes.
    pub multiclass_accuracy: Option<f64>,
    /// 1 - multiclass accuracy.
    pub multiclass_error: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl MetricReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label.as_str() == label)
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn full_report(cm: &ConfusionMatrix) -> Result<MetricReport> {
    if cm.labels.is_empty() {
        return Err(Error::Empty("confusion matrix has no classes".into()));
    }
    let per_class = cm
        .labels
        .iter()
        .map(|label| {
            let b = one_vs_rest(cm, label)?;
            Ok(ClassMetrics {
                label: label.clone(),
                counts: b,
                sensitivity: sensitivity(&b),
                specificity: specificity(&b),
                precision: precision(&b),
                recall: recall(&b),
                f1: f1(&b),
                binary_accuracy: accuracy(&b),
                binary_error: error_rate(&b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let macro_average = MacroAverages {
        sensitivity: mean_defined(per_class.iter().map(|c| c.sensitivity)),
        specificity: mean_defined(per_class.iter().map(|c| c.specificity)),
        precision: mean_defined(per_class.iter().map(|c| c.precision)),
        recall: mean_defined(per_class.iter().map(|c| c.recall)),
        f1: mean_defined(per_class.iter().map(|c| c.f1)),
    };
    let total = cm.total();
    let multiclass_accuracy = ratio(cm.trace(), total);
    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        total,
        per_class,
        macro_average,
        multiclass_accuracy,
        multiclass_error: ratio(total - cm.trace(), total),
        confusion: cm.clone(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Plain-text rendering of a report.
pub fn render_text(report: &MetricReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "classification report (schema v{})", report.schema_version);
    let _ = writeln!(out, "rows = actual class, columns = predicted class");
    let _ = writeln!(out, "f1 is the harmonic mean 2*P*R/(P+R); undefined metrics print as n/a");
    let _ = writeln!(out);

    let width = report
        .confusion
        .labels
        .iter()
        .map(|l| l.as_str().len())
        .max()
        .unwrap_or(0)
        .max(12);
    let _ = write!(out, "{:width$}", "");
    for l in &report.confusion.labels {
        let _ = write!(out, " {:>width$}", l.as_str());
    }
    let _ = writeln!(out);
    for (l, row) in report.confusion.labels.iter().zip(&report.confusion.counts) {
        let _ = write!(out, "{:width$}", l.as_str());
        for c in row {
            let _ = write!(out, " {c:>width$}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);

    let _ = writeln!(
        out,
        "{:width$} {:>5} {:>5} {:>5} {:>5} {:>11} {:>11} {:>9} {:>7} {:>7} {:>9} {:>9}",
        "class", "TP", "FP", "TN", "FN", "sensitivity", "specificity", "precision", "recall", "f1", "accuracy", "error"
    );
    for c in &report.per_class {
        let _ = writeln!(
            out,
            "{:width$} {:>5} {:>5} {:>5} {:>5} {:>11} {:>11} {:>9} {:>7} {:>7} {:>9} {:>9}",
            c.label.as_str(),
            c.counts.tp,
            c.counts.fp,
            c.counts.tn,
            c.counts.fn_,
            cell(c.sensitivity),
            cell(c.specificity),
            cell(c.precision),
            cell(c.recall),
            cell(c.f1),
            cell(c.binary_accuracy),
            cell(c.binary_error),
        );
    }
    let m = &report.macro_average;
    let _ = writeln!(
        out,
        "{:width$} {:>5} {:>5} {:>5} {:>5} {:>11} {:>11} {:>9} {:>7} {:>7}",
        "macro avg",
        "",
        "",
        "",
        "",
        cell(m.sensitivity),
        cell(m.specificity),
        cell(m.precision),
        cell(m.recall),
        cell(m.f1),
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "multi-class accuracy (trace/total): {}   multi-class error: {}   documents: {}",
        cell(report.multiclass_accuracy),
        cell(report.multiclass_error),
        report.total
    );
    out
}
