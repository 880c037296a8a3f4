//! Bag-of-words vocabulary and document-term count matrices.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseCountMatrix;

pub use crate::sparse::CsrMatrix;

/// Lexicographically sorted token list; a token's column is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    token_to_index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Accepts a strictly increasing token list.
    pub fn from_sorted(tokens: Vec<String>) -> Result<Self> {
        if let Some(w) = tokens.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary not strictly sorted at `{}` / `{}`",
                w[0], w[1]
            )));
        }
        let token_to_index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary {
            index_to_token: tokens,
            token_to_index,
        })
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_sorted(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.index_to_token
    }
}

/// Sorted distinct tokens across `docs`, keeping only tokens that occur in at
/// least `min_df` documents (`min_df <= 1` keeps everything).
pub fn build_vocabulary<D: AsRef<[String]>>(docs: &[D], min_df: usize) -> Result<Vocabulary> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.as_ref().iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::Empty("every document is empty after preprocessing".into()));
    }
    let tokens: Vec<String> = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df)
        .map(|(t, _)| t.to_string())
        .collect();
    if tokens.is_empty() {
        return Err(Error::Empty(format!("no token reaches min_df = {min_df}")));
    }
    Vocabulary::from_sorted(tokens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountOutput {
    pub matrix: SparseCountMatrix,
    /// Per document, how many tokens had no vocabulary column.
    pub unknown_tokens: Vec<usize>,
}

pub fn count_vectorize<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> CountOutput {
    let mut matrix = SparseCountMatrix::empty(vocab.len());
    let mut unknown_tokens = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        let mut unknown = 0;
        for t in doc.as_ref() {
            match vocab.index_of(t) {
                Some(j) => *counts.entry(j).or_default() += 1,
                None => unknown += 1,
            }
        }
        matrix
            .push_row(counts.into_iter().collect())
            .expect("vocabulary indices are in range and unique");
        unknown_tokens.push(unknown);
    }
    CountOutput {
        matrix,
        unknown_tokens,
    }
}

pub fn row_sum(matrix: &SparseCountMatrix, row: usize) -> Result<u64> {
    matrix.row_sum(row)
}
