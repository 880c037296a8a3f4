//! Corpus loading and stratified train/test partitioning.
//!
//! A manifest is a UTF-8 text file with one `path<TAB>label` record per line.
//! Blank lines and lines starting with `#` are skipped; relative paths are
//! resolved against the manifest's directory. The document id is the path
//! exactly as written in the manifest. A directory may be given instead of a
//! manifest file, in which case every immediate subdirectory is a label and
//! every regular file inside it is a document with id `label/filename`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Canonical sensitivity classes, in sorted order.
pub const DEFAULT_LABELS: [&str; 3] = ["Internal", "Restricted", "Unrestricted"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(name: impl Into<String>) -> Self {
        ClassLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel::new(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub id: String,
    pub source_path: PathBuf,
    pub raw_text: String,
    pub label: ClassLabel,
    /// Number of invalid UTF-8 sequences replaced with U+FFFD while reading.
    pub replaced_sequences: usize,
}

impl LabeledDocument {
    pub fn from_text(id: impl Into<String>, label: impl Into<ClassLabel>, text: impl Into<String>) -> Self {
        let id = id.into();
        LabeledDocument {
            source_path: PathBuf::from(&id),
            id,
            raw_text: text.into(),
            label: label.into(),
            replaced_sequences: 0,
        }
    }
}

impl From<String> for ClassLabel {
    fn from(s: String) -> Self {
        ClassLabel(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<LabeledDocument>,
    label_set: Vec<ClassLabel>,
}

impl Corpus {
    /// Builds a corpus, deriving the label set as the sorted distinct labels.
    pub fn new(documents: Vec<LabeledDocument>) -> Result<Self> {
        let label_set: Vec<ClassLabel> = documents
            .iter()
            .map(|d| d.label.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        Corpus::with_labels(documents, label_set)
    }

    /// Builds a corpus over an explicit label set. Labels are sorted; every
    /// document label must belong to the set.
    pub fn with_labels(documents: Vec<LabeledDocument>, mut label_set: Vec<ClassLabel>) -> Result<Self> {
        label_set.sort();
        label_set.dedup();
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            if label_set.binary_search(&doc.label).is_err() {
                return Err(Error::UnknownLabel(doc.label.to_string()));
            }
        }
        Ok(Corpus {
            documents,
            label_set,
        })
    }

    pub fn documents(&self) -> &[LabeledDocument] {
        &self.documents
    }

    pub fn label_set(&self) -> &[ClassLabel] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Index of `label` in the sorted label set.
    pub fn label_index(&self, label: &ClassLabel) -> Option<usize> {
        self.label_set.binary_search(label).ok()
    }

    /// Per-document label indices into [`Corpus::label_set`].
    pub fn label_indices(&self) -> Vec<usize> {
        self.documents
            .iter()
            .map(|d| self.label_index(&d.label).expect("label set covers documents"))
            .collect()
    }

    /// Document count per label, in label-set order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_set.len()];
        for idx in self.label_indices() {
            counts[idx] += 1;
        }
        counts
    }

    /// Sub-corpus of the given document positions, keeping this corpus's label set.
    pub fn subset(&self, positions: &[usize]) -> Corpus {
        Corpus {
            documents: positions.iter().map(|&i| self.documents[i].clone()).collect(),
            label_set: self.label_set.clone(),
        }
    }
}

pub fn load_corpus(manifest: &Path) -> Result<Corpus> {
    let meta = fs::metadata(manifest).map_err(|e| Error::io(manifest, e))?;
    let docs = if meta.is_dir() {
        load_directory(manifest)?
    } else {
        load_manifest(manifest)?
    };
    if docs.is_empty() {
        return Err(Error::Manifest {
            path: manifest.to_path_buf(),
            message: "no documents listed".into(),
        });
    }
    Corpus::new(docs)
}

fn load_manifest(manifest: &Path) -> Result<Vec<LabeledDocument>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (path, label) = line.split_once('\t').ok_or_else(|| Error::Manifest {
            path: manifest.to_path_buf(),
            message: format!("line {}: expected `path<TAB>label`", lineno + 1),
        })?;
        let label = label.trim();
        if path.is_empty() || label.is_empty() || label.contains('\t') {
            return Err(Error::Manifest {
                path: manifest.to_path_buf(),
                message: format!("line {}: expected `path<TAB>label`", lineno + 1),
            });
        }
        let source_path = base.join(path);
        let (raw_text, replaced_sequences) = read_text_lossy(&source_path)?;
        docs.push(LabeledDocument {
            id: path.to_string(),
            source_path,
            raw_text,
            label: ClassLabel::new(label),
            replaced_sequences,
        });
    }
    Ok(docs)
}

fn load_directory(root: &Path) -> Result<Vec<LabeledDocument>> {
    let mut docs = Vec::new();
    for class_dir in sorted_entries(root)? {
        if !class_dir.is_dir() {
            continue;
        }
        let label = file_name(&class_dir);
        for file in sorted_entries(&class_dir)? {
            if !file.is_file() {
                continue;
            }
            let (raw_text, replaced_sequences) = read_text_lossy(&file)?;
            docs.push(LabeledDocument {
                id: format!("{}/{}", label, file_name(&file)),
                source_path: file,
                raw_text,
                label: ClassLabel::new(label.clone()),
                replaced_sequences,
            });
        }
    }
    Ok(docs)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a file as UTF-8, replacing invalid sequences with U+FFFD. Returns the
/// text and the number of replaced sequences.
pub fn read_text_lossy(path: &Path) -> Result<(String, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_lossy(&bytes))
}

pub fn decode_lossy(bytes: &[u8]) -> (String, usize) {
    let mut text = String::with_capacity(bytes.len());
    let mut replaced = 0;
    for chunk in bytes.utf8_chunks() {
        text.push_str(chunk.valid());
        if !chunk.invalid().is_empty() {
            text.push(char::REPLACEMENT_CHARACTER);
            replaced += 1;
        }
    }
    (text, replaced)
}

/// Stratified train/test partition.
///
/// Documents are grouped by label (in label-set order); each group's
/// position list is shuffled with one seeded Fisher–Yates stream, and the
/// first `round(test_fraction * n_c)` positions go to the test side, capped
/// at `n_c - 1` so every class stays in train. Both halves keep corpus order.
pub fn split_train_test(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    let test_positions = stratified_test_positions(&corpus.label_indices(), corpus.label_set(), test_fraction, seed)?;
    let in_test: HashSet<usize> = test_positions.into_iter().collect();
    let (test, train): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|i| in_test.contains(i));
    Ok((corpus.subset(&train), corpus.subset(&test)))
}

pub(crate) fn stratified_test_positions(
    labels: &[usize],
    label_set: &[ClassLabel],
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &label) in labels.iter().enumerate() {
        groups.entry(label).or_default().push(pos);
    }
    let mut rng = rng::seeded(seed);
    let mut test = Vec::new();
    for (label, mut positions) in groups {
        if positions.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: label_set.get(label).map(|l| l.to_string()).unwrap_or_else(|| label.to_string()),
                count: positions.len(),
                required: 2,
            });
        }
        rng::fisher_yates(&mut positions, &mut rng);
        let n_test = ((test_fraction * positions.len() as f64).round() as usize).min(positions.len() - 1);
        test.extend_from_slice(&positions[..n_test]);
    }
    test.sort_unstable();
    Ok(test)
}
