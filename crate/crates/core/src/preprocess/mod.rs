//! Text normalisation: lowercase, punctuation removal, whitespace
//! tokenisation, stopword removal and Porter stemming, applied in that order.

mod porter;

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};
use crate::ingest::LabeledDocument;

pub use porter::stem;

/// Identifier recorded in model bundles for the punctuation rule below.
pub const PUNCTUATION_RULE: &str = "unicode-p-categories-to-space";

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// Parses a newline-delimited list. `#` starts a comment line; entries are
    /// trimmed and lowercased.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "stopword list line {}: `{line}` contains whitespace",
                    lineno + 1
                )));
            }
            words.insert(line.to_lowercase());
        }
        Ok(StopwordList { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        Self::parse(&joined.join("\n"))
    }

    pub fn empty() -> Self {
        StopwordList {
            words: BTreeSet::new(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Hex SHA-256 over the sorted words joined by newlines.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hex(&hasher.finalize())
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        StopwordList::parse(DEFAULT_STOPWORDS).expect("bundled stopword list is well formed")
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub stopwords: StopwordList,
    pub stemming: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: StopwordList::default(),
            stemming: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

pub fn normalize_case(text: &str) -> String {
    text.to_lowercase()
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Replaces every Unicode punctuation character with one space.
pub fn strip_punctuation(text: &str) -> String {
    text.chars().map(|c| if is_punctuation(c) { ' ' } else { c }).collect()
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Runs the full pipeline over raw text.
///
/// Stemming can map a content word onto a stopword (`ones` -> `on`); such
/// stems are dropped as well so no output token is ever in the stoplist.
pub fn preprocess_text(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let lowered = normalize_case(text);
    let stripped = strip_punctuation(&lowered);
    let tokens = remove_stopwords(tokenize(&stripped), &config.stopwords);
    if !config.stemming {
        return tokens;
    }
    tokens
        .iter()
        .map(|t| stem(t))
        .filter(|t| !config.stopwords.contains(t))
        .collect()
}

pub fn preprocess(doc: &LabeledDocument, config: &PreprocessConfig) -> TokenizedDocument {
    TokenizedDocument {
        doc_id: doc.id.clone(),
        tokens: preprocess_text(&doc.raw_text, config),
    }
}

/// Preprocesses documents in parallel; output order follows input order.
pub fn preprocess_all(docs: &[LabeledDocument], config: &PreprocessConfig) -> Vec<TokenizedDocument> {
    docs.par_iter().map(|d| preprocess(d, config)).collect()
}
