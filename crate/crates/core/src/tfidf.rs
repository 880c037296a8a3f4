//! Term-frequency / inverse-document-frequency weighting.
//!
//! `tf(d, j) = count(d, j) / Σ_j count(d, j)` and, in raw mode,
//! `idf(j) = ln(N / df(j))`. The smoothed mode uses
//! `ln((1 + N) / (1 + df(j))) + 1`. Weighted rows are scaled to unit
//! Euclidean length unless normalisation is disabled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseCountMatrix, SparseRealMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfMode {
    #[default]
    Raw,
    Smoothed,
}

impl IdfMode {
    pub fn idf(self, n_docs: usize, df: usize) -> f64 {
        let (n, df) = (n_docs as f64, df as f64);
        match self {
            IdfMode::Raw => (n / df).ln(),
            IdfMode::Smoothed => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(IdfMode::Raw),
            "smoothed" | "smooth" => Ok(IdfMode::Smoothed),
            other => Err(Error::Config(format!("unknown idf mode `{other}` (expected raw or smoothed)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IdfMode::Raw => "raw",
            IdfMode::Smoothed => "smoothed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    L2,
    None,
}

impl Norm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Norm::L2),
            "none" => Ok(Norm::None),
            other => Err(Error::Config(format!("unknown norm `{other}` (expected l2 or none)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub idf: Vec<f64>,
    pub n_train_docs: usize,
    pub smoothing_mode: IdfMode,
    pub norm: Norm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdfFit {
    pub model: TfIdfModel,
    /// Columns never seen in the fitting matrix; their idf uses the smoothed rule.
    pub unseen_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutput {
    pub matrix: SparseRealMatrix,
    /// Rows that carry no weight at all (empty documents, or only idf-0 tokens).
    pub zero_rows: Vec<bool>,
}

pub fn compute_tf(counts: &SparseCountMatrix) -> SparseRealMatrix {
    counts.map_rows(|_, row| {
        let total: u64 = row.values.iter().map(|&v| u64::from(v)).sum();
        row.iter().map(|(c, v)| (c, f64::from(v) / total as f64)).collect()
    })
}

pub fn fit_idf(counts: &SparseCountMatrix, mode: IdfMode, norm: Norm) -> Result<IdfFit> {
    let n = counts.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit idf on zero documents".into()));
    }
    let mut df = vec![0usize; counts.n_cols()];
    for &c in counts.col_indices() {
        df[c] += 1;
    }
    let mut unseen_columns = Vec::new();
    let idf = df
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            if d == 0 {
                unseen_columns.push(j);
                IdfMode::Smoothed.idf(n, 0)
            } else {
                mode.idf(n, d)
            }
        })
        .collect();
    Ok(IdfFit {
        model: TfIdfModel {
            idf,
            n_train_docs: n,
            smoothing_mode: mode,
            norm,
        },
        unseen_columns,
    })
}

impl TfIdfModel {
    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    pub fn transform(&self, counts: &SparseCountMatrix) -> Result<TransformOutput> {
        if counts.n_cols() != self.idf.len() {
            return Err(Error::DimensionMismatch {
                context: "tf-idf transform columns".into(),
                expected: self.idf.len(),
                found: counts.n_cols(),
            });
        }
        let tf = compute_tf(counts);
        let mut zero_rows = Vec::with_capacity(tf.n_rows());
        let matrix = tf.map_rows(|_, row| {
            let mut weighted: Vec<(usize, f64)> = row
                .iter()
                .map(|(c, v)| (c, v * self.idf[c]))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            if self.norm == Norm::L2 {
                let norm = weighted.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, v) in &mut weighted {
                        *v /= norm;
                    }
                }
            }
            zero_rows.push(weighted.is_empty());
            weighted
        });
        Ok(TransformOutput { matrix, zero_rows })
    }
}

pub fn transform(counts: &SparseCountMatrix, model: &TfIdfModel) -> Result<TransformOutput> {
    model.transform(counts)
}
