//! The fitted text-classification pipeline: vocabulary, idf weights,
//! chi-squared column selection and the boosted-tree classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::gbdt::{self, GbdtHyperparams, GbdtModel};
use crate::ingest::ClassLabel;
use crate::preprocess::{self, PreprocessConfig};
use crate::select::{Chi2Selector, DEFAULT_K};
use crate::sparse::SparseRealMatrix;
use crate::tfidf::{self, IdfMode, Norm, TfIdfModel};
use crate::vectorize::{self, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub min_df: usize,
    pub idf_mode: IdfMode,
    pub norm: Norm,
    pub k: usize,
    pub gbdt: GbdtHyperparams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            min_df: 1,
            idf_mode: IdfMode::Raw,
            norm: Norm::L2,
            k: DEFAULT_K,
            gbdt: GbdtHyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub vocabulary: Vocabulary,
    pub tfidf: TfIdfModel,
    pub selector: Chi2Selector,
    pub gbdt: GbdtModel,
}

/// Feature rows ready for the classifier plus per-row diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub matrix: SparseRealMatrix,
    pub unknown_tokens: Vec<usize>,
    /// Row has no nonzero feature after selection.
    pub zero_rows: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub probabilities: Vec<f64>,
    pub unknown_tokens: usize,
    pub zero_vector: bool,
}

impl FittedPipeline {
    /// Fits every stage on the given token lists only.
    pub fn fit<D: AsRef<[String]>>(
        docs: &[D],
        y: &[usize],
        labels: &[ClassLabel],
        params: &PipelineParams,
    ) -> Result<Self> {
        if docs.len() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "training labels".into(),
                expected: docs.len(),
                found: y.len(),
            });
        }
        let vocabulary = vectorize::build_vocabulary(docs, params.min_df).stage("vectorize")?;
        let counts = vectorize::count_vectorize(docs, &vocabulary).matrix;
        let tfidf = tfidf::fit_idf(&counts, params.idf_mode, params.norm).stage("tfidf")?.model;
        let weighted = tfidf.transform(&counts).stage("tfidf")?.matrix;
        let selector = Chi2Selector::fit(&weighted, y, labels.len(), params.k).stage("select")?;
        let selected = selector.apply(&weighted).stage("select")?;
        let gbdt = gbdt::fit(&selected, y, labels, &params.gbdt).stage("gbdt")?;
        Ok(FittedPipeline {
            vocabulary,
            tfidf,
            selector,
            gbdt,
        })
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.gbdt.class_labels
    }

    pub fn features<D: AsRef<[String]>>(&self, docs: &[D]) -> Result<Features> {
        let counts = vectorize::count_vectorize(docs, &self.vocabulary);
        let weighted = self.tfidf.transform(&counts.matrix).stage("tfidf")?;
        let matrix = self.selector.apply(&weighted.matrix).stage("select")?;
        let zero_rows = matrix.rows().map(|r| r.nnz() == 0).collect();
        Ok(Features {
            matrix,
            unknown_tokens: counts.unknown_tokens,
            zero_rows,
        })
    }

    /// Classifies token lists. Rows with no usable feature fall back to the
    /// class prior instead of being routed through the trees.
    pub fn predict_tokens<D: AsRef<[String]>>(&self, docs: &[D]) -> Result<Vec<Prediction>> {
        let features = self.features(docs)?;
        features
            .matrix
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let zero_vector = features.zero_rows[i];
                let probabilities = if zero_vector {
                    self.gbdt.prior_proba()
                } else {
                    self.gbdt.predict_proba(&row).stage("gbdt")?
                };
                Ok(Prediction {
                    class_index: gbdt::argmax(&probabilities),
                    probabilities,
                    unknown_tokens: features.unknown_tokens[i],
                    zero_vector,
                })
            })
            .collect()
    }

    pub fn predict_text(&self, text: &str, preprocess: &PreprocessConfig) -> Result<Prediction> {
        let tokens = preprocess::preprocess_text(text, preprocess);
        let mut out = self.predict_tokens(&[tokens])?;
        Ok(out.remove(0))
    }

    /// Checks that every stage agrees on dimensions.
    pub fn validate(&self) -> Result<()> {
        let v = self.vocabulary.len();
        let mismatch = |field: &str, expected: usize, found: usize| {
            Err(Error::InvalidBundle {
                field: field.into(),
                message: format!("expected length {expected}, found {found}"),
            })
        };
        if self.tfidf.idf.len() != v {
            return mismatch("tfidf.idf", v, self.tfidf.idf.len());
        }
        if self.tfidf.idf.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidBundle {
                field: "tfidf.idf".into(),
                message: "idf values must be finite and nonnegative".into(),
            });
        }
        if self.selector.scores.len() != v {
            return mismatch("selector.scores", v, self.selector.scores.len());
        }
        self.selector.validate()?;
        if self.gbdt.n_features != self.selector.k_effective() {
            return mismatch("gbdt.n_features", self.selector.k_effective(), self.gbdt.n_features);
        }
        self.gbdt.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    fn fixture() -> (Vec<Vec<String>>, Vec<usize>, Vec<ClassLabel>) {
        let docs = [
            ("salari password merger", 1),
            ("password account merger secret", 1),
            ("salari secret account", 1),
            ("meet agenda team", 0),
            ("agenda team schedul", 0),
            ("meet schedul team", 0),
            ("press releas public", 2),
            ("public product releas", 2),
            ("press product public", 2),
        ];
        (
            docs.iter().map(|(t, _)| toks(t)).collect(),
            docs.iter().map(|&(_, y)| y).collect(),
            vec!["Internal".into(), "Restricted".into(), "Unrestricted".into()],
        )
    }

    fn params() -> PipelineParams {
        PipelineParams {
            k: 12,
            gbdt: GbdtHyperparams {
                n_iterations: 20,
                min_samples_leaf: 1,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn fits_and_classifies_training_documents() {
        let (docs, y, labels) = fixture();
        let p = FittedPipeline::fit(&docs, &y, &labels, &params()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.selector.k_effective(), 12);
        let preds = p.predict_tokens(&docs).unwrap();
        for (pred, &want) in preds.iter().zip(&y) {
            assert_eq!(pred.class_index, want);
            assert!((pred.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_and_empty_inputs_use_the_prior() {
        let (docs, y, labels) = fixture();
        let p = FittedPipeline::fit(&docs, &y, &labels, &params()).unwrap();
        let preds = p.predict_tokens(&[toks(""), toks("zzz qqq")]).unwrap();
        for pred in &preds {
            assert!(pred.zero_vector);
            assert!(pred.probabilities.iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-12));
            assert_eq!(pred.class_index, 0);
        }
        assert_eq!(preds[1].unknown_tokens, 2);
    }

    #[test]
    fn label_predictions_agree_with_classifier_on_nonzero_rows() {
        let (docs, y, labels) = fixture();
        let p = FittedPipeline::fit(&docs, &y, &labels, &params()).unwrap();
        let probe = vec![toks("salari team"), toks("press agenda secret"), toks("product")];
        let features = p.features(&probe).unwrap();
        let preds = p.predict_tokens(&probe).unwrap();
        for (i, row) in features.matrix.rows().enumerate() {
            if !features.zero_rows[i] {
                assert_eq!(preds[i].class_index, p.gbdt.predict_index(&row).unwrap());
            }
        }
    }

    #[test]
    fn validate_catches_inconsistent_dimensions() {
        let (docs, y, labels) = fixture();
        let mut p = FittedPipeline::fit(&docs, &y, &labels, &params()).unwrap();
        p.tfidf.idf.pop();
        assert!(matches!(p.validate(), Err(Error::InvalidBundle { field, .. }) if field == "tfidf.idf"));
    }
}
