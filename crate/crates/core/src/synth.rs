//! Seeded generator of keyword-themed synthetic corpora, used for desk-scale
//! end-to-end runs and tests.
//!
//! Each class draws words uniformly from its own vocabulary: forty theme words
//! plus ten words shared by every class, so a fifth of each class vocabulary
//! carries no class signal.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{Corpus, LabeledDocument};
use crate::rng;

const SHARED: [&str; 10] = [
    "document", "report", "update", "company", "project", "department", "review", "office", "summary", "version",
];

const RESTRICTED: [&str; 40] = [
    "salary", "password", "merger", "acquisition", "payroll", "credential", "account", "bank", "ssn", "passport",
    "diagnosis", "patient", "lawsuit", "settlement", "bonus", "compensation", "confidential", "secret", "encryption",
    "privatekey", "token", "routing", "iban", "creditcard", "tax", "audit", "fraud", "investigation", "termination",
    "severance", "valuation", "forecast", "earnings", "insider", "dividend", "shareholder", "pin", "login",
    "biometric", "medical",
];

const INTERNAL: [&str; 40] = [
    "meeting", "agenda", "schedule", "team", "sprint", "standup", "roadmap", "onboarding", "training", "workshop",
    "retrospective", "milestone", "deadline", "ticket", "backlog", "deployment", "staging", "server", "maintenance",
    "outage", "helpdesk", "laptop", "printer", "cafeteria", "parking", "badge", "holiday", "calendar", "minutes",
    "whiteboard", "timesheet", "handbook", "procedure", "checklist", "memo", "intranet", "wiki", "facilities",
    "escalation", "rota",
];

const UNRESTRICTED: [&str; 40] = [
    "press", "release", "announcement", "product", "launch", "brochure", "website", "blog", "newsletter", "event",
    "conference", "webinar", "customer", "testimonial", "award", "partnership", "community", "sponsorship", "career",
    "job", "opening", "recruitment", "advertisement", "campaign", "social", "media", "catalog", "pricing", "store",
    "download", "tutorial", "faq", "support", "feature", "celebrate", "public", "exhibition", "magazine", "interview",
    "sustainability",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub docs_per_class: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            docs_per_class: 100,
            min_words: 15,
            max_words: 40,
            seed: 7,
        }
    }
}

/// Class name with its full vocabulary (theme words then shared words).
pub fn themes() -> Vec<(&'static str, Vec<&'static str>)> {
    [("Restricted", &RESTRICTED), ("Internal", &INTERNAL), ("Unrestricted", &UNRESTRICTED)]
        .into_iter()
        .map(|(label, words)| (label, words.iter().chain(SHARED.iter()).copied().collect()))
        .collect()
}

/// A single synthetic document of `len` words from `vocabulary`.
pub fn document<R: Rng>(vocabulary: &[&str], len: usize, rng: &mut R) -> String {
    (0..len)
        .map(|_| vocabulary[rng.gen_range(0..vocabulary.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates `3 * docs_per_class` documents, interleaved by class.
pub fn generate(spec: &SynthSpec) -> Result<Corpus> {
    if spec.docs_per_class == 0 || spec.min_words == 0 || spec.min_words > spec.max_words {
        return Err(Error::InvalidArgument(format!("bad synthetic corpus spec {spec:?}")));
    }
    let themes = themes();
    let mut rng = rng::seeded(spec.seed);
    let mut docs = Vec::with_capacity(themes.len() * spec.docs_per_class);
    for i in 0..spec.docs_per_class {
        for (label, vocabulary) in &themes {
            let len = rng.gen_range(spec.min_words..=spec.max_words);
            let text = document(vocabulary, len, &mut rng);
            docs.push(LabeledDocument::from_text(
                format!("{}-{i:04}.txt", label.to_lowercase()),
                *label,
                text,
            ));
        }
    }
    Corpus::new(docs)
}

/// Writes each document under `dir/docs/` and a `manifest.tsv` listing them.
/// Returns the manifest path.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    let docs_dir = dir.join("docs");
    fs::create_dir_all(&docs_dir).map_err(|e| Error::io(&docs_dir, e))?;
    let mut manifest = String::new();
    for doc in corpus.documents() {
        let name = Path::new(&doc.id)
            .file_name()
            .ok_or_else(|| Error::InvalidArgument(format!("document id `{}` has no file name", doc.id)))?;
        let path = docs_dir.join(name);
        fs::write(&path, &doc.raw_text).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("docs/{}\t{}\n", name.to_string_lossy(), doc.label));
    }
    let manifest_path = dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
