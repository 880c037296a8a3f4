//! Versioned, self-describing persistence of a fitted pipeline.
//!
//! A bundle is pretty-printed JSON. Reals are written in their shortest form
//! that parses back to the same bits, and every map is ordered, so saving the
//! same bundle twice yields identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{ClassLabel, Corpus};
use crate::pipeline::{FittedPipeline, PipelineParams, Prediction};
use crate::preprocess::{self, PreprocessConfig, StopwordList, PUNCTUATION_RULE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSection {
    pub punctuation_rule: String,
    pub stemming: bool,
    pub stoplist_sha256: String,
    pub stopwords: StopwordList,
}

impl PreprocessSection {
    pub fn new(config: &PreprocessConfig) -> Self {
        PreprocessSection {
            punctuation_rule: PUNCTUATION_RULE.to_string(),
            stemming: config.stemming,
            stoplist_sha256: config.stopwords.fingerprint(),
            stopwords: config.stopwords.clone(),
        }
    }

    pub fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            stopwords: self.stopwords.clone(),
            stemming: self.stemming,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub seed: u64,
    pub corpus_sha256: String,
    pub n_train_docs: usize,
    /// Creation time, if recorded. Left out of determinism comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub preprocess: PreprocessSection,
    pub labels: Vec<ClassLabel>,
    pub params: PipelineParams,
    pub pipeline: FittedPipeline,
    pub metadata: BundleMetadata,
}

/// Hex SHA-256 over every document's id, label and text in corpus order.
pub fn corpus_fingerprint(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    for doc in corpus.documents() {
        for part in [doc.id.as_str(), doc.label.as_str(), doc.raw_text.as_str()] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
    }
    preprocess::hex(&hasher.finalize())
}

impl ModelBundle {
    pub fn new(
        preprocess: &PreprocessConfig,
        params: PipelineParams,
        pipeline: FittedPipeline,
        metadata: BundleMetadata,
    ) -> Self {
        ModelBundle {
            format_version: FORMAT_VERSION,
            preprocess: PreprocessSection::new(preprocess),
            labels: pipeline.labels().to_vec(),
            params,
            pipeline,
            metadata,
        }
    }

    /// Preprocesses, fits and wraps a corpus in one step.
    pub fn train(corpus: &Corpus, preprocess: &PreprocessConfig, params: &PipelineParams) -> Result<Self> {
        let docs: Vec<Vec<String>> = preprocess::preprocess_all(corpus.documents(), preprocess)
            .into_iter()
            .map(|d| d.tokens)
            .collect();
        let pipeline = FittedPipeline::fit(&docs, &corpus.label_indices(), corpus.label_set(), params)?;
        let metadata = BundleMetadata {
            seed: params.gbdt.seed,
            corpus_sha256: corpus_fingerprint(corpus),
            n_train_docs: corpus.len(),
            created: None,
        };
        Ok(ModelBundle::new(preprocess, *params, pipeline, metadata))
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        self.preprocess.config()
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        self.pipeline.predict_text(text, &self.preprocess_config())
    }

    pub fn predict_texts(&self, texts: &[&str]) -> Result<Vec<Prediction>> {
        let config = self.preprocess_config();
        let docs: Vec<Vec<String>> = texts.iter().map(|t| preprocess::preprocess_text(t, &config)).collect();
        self.pipeline.predict_tokens(&docs)
    }

    pub fn label(&self, index: usize) -> &ClassLabel {
        &self.labels[index]
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: self.format_version,
            });
        }
        if self.preprocess.punctuation_rule != PUNCTUATION_RULE {
            return Err(Error::InvalidBundle {
                field: "preprocess.punctuation_rule".into(),
                message: format!(
                    "unsupported rule `{}` (this build implements `{PUNCTUATION_RULE}`)",
                    self.preprocess.punctuation_rule
                ),
            });
        }
        if self.preprocess.stoplist_sha256 != self.preprocess.stopwords.fingerprint() {
            return Err(Error::InvalidBundle {
                field: "preprocess.stoplist_sha256".into(),
                message: "does not match the embedded stopword list".into(),
            });
        }
        if self.labels.as_slice() != self.pipeline.labels() {
            return Err(Error::InvalidBundle {
                field: "labels".into(),
                message: "differ from the classifier's label set".into(),
            });
        }
        self.pipeline.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and validates. The version is checked before the full schema so
    /// a file from another format version reports both versions.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: header.format_version,
            });
        }
        let bundle: ModelBundle = serde_json::from_str(text)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    bundle.validate()?;
    std::fs::write(path, bundle.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelBundle::from_json(&text).map_err(|e| match e {
        Error::Serialization(inner) => Error::InvalidBundle {
            field: path.display().to_string(),
            message: inner.to_string(),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::GbdtHyperparams;
    use crate::ingest::LabeledDocument;

    fn corpus() -> Corpus {
        let rows = [
            ("r1", "Restricted", "salary password merger"),
            ("r2", "Restricted", "password account merger secret"),
            ("r3", "Restricted", "salary secret account"),
            ("i1", "Internal", "meeting agenda team"),
            ("i2", "Internal", "agenda team schedule"),
            ("i3", "Internal", "meeting schedule team"),
            ("u1", "Unrestricted", "press release public"),
            ("u2", "Unrestricted", "public product release"),
            ("u3", "Unrestricted", "press product public"),
        ];
        Corpus::new(rows.iter().map(|&(id, l, t)| LabeledDocument::from_text(id, l, t)).collect()).unwrap()
    }

    fn bundle() -> ModelBundle {
        let params = PipelineParams {
            gbdt: GbdtHyperparams {
                n_iterations: 10,
                min_samples_leaf: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        ModelBundle::train(&corpus(), &PreprocessConfig::default(), &params).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let b = bundle();
        let text = b.to_json().unwrap();
        let back = ModelBundle::from_json(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn training_twice_gives_identical_bytes() {
        assert_eq!(bundle().to_json().unwrap(), bundle().to_json().unwrap());
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let mut b = bundle();
        b.format_version = 7;
        let text = serde_json::to_string(&b).unwrap();
        let err = ModelBundle::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { expected: FORMAT_VERSION, found: 7 }));
        assert!(err.to_string().contains('7') && err.to_string().contains('1'));
    }

    #[test]
    fn truncated_idf_is_rejected_by_field() {
        let mut b = bundle();
        b.pipeline.tfidf.idf.pop();
        let text = serde_json::to_string(&b).unwrap();
        assert!(matches!(
            ModelBundle::from_json(&text),
            Err(Error::InvalidBundle { field, .. }) if field == "tfidf.idf"
        ));
    }

    #[test]
    fn tampered_stoplist_is_rejected() {
        let mut b = bundle();
        b.preprocess.stopwords = StopwordList::from_words(["salary"]).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        assert!(matches!(
            ModelBundle::from_json(&text),
            Err(Error::InvalidBundle { field, .. }) if field == "preprocess.stoplist_sha256"
        ));
    }

    #[test]
    fn save_and_load_preserve_predictions() {
        let b = bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.json");
        save_bundle(&b, &path).unwrap();
        let loaded = load_bundle(&path).unwrap();
        for text in ["salary merger", "team agenda", "", "press release today"] {
            assert_eq!(loaded.predict_text(text).unwrap(), b.predict_text(text).unwrap());
        }
    }

    #[test]
    fn corrupt_file_is_a_bundle_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_bundle(&path), Err(Error::InvalidBundle { .. })));
    }

    #[test]
    fn fingerprint_depends_on_content() {
        let a = corpus();
        let mut docs = a.documents().to_vec();
        docs[0].raw_text.push('!');
        let b = Corpus::new(docs).unwrap();
        assert_ne!(corpus_fingerprint(&a), corpus_fingerprint(&b));
        assert_eq!(corpus_fingerprint(&a), corpus_fingerprint(&corpus()));
    }
}
