//! Run configuration read from a sectioned TOML file.
//!
//! ```toml
//! seed = 42
//! test_fraction = 0.25
//!
//! [preprocess]
//! stopwords = "stopwords.txt"   # default: bundled English list
//! stemming = true
//!
//! [vectorize]
//! min_df = 1
//!
//! [tfidf]
//! smoothing_mode = "raw"        # or "smoothed"
//! norm = "l2"                   # or "none"
//!
//! [select]
//! k = 1000
//!
//! [gbdt]
//! n_iterations = 100
//! learning_rate = 0.1
//! max_depth = 3
//! min_samples_leaf = 2
//!
//! [tune]
//! n_candidates = 10
//! n_splits = 5
//! ```
//!
//! Every key is optional. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gbdt::GbdtHyperparams;
use crate::pipeline::PipelineParams;
use crate::preprocess::{PreprocessConfig, StopwordList};
use crate::tfidf::{IdfMode, Norm};
use crate::tune::DEFAULT_N_SPLITS;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEST_FRACTION: f64 = 0.25;
pub const DEFAULT_N_CANDIDATES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub stopwords: Option<PathBuf>,
    pub stemming: bool,
    pub params: PipelineParams,
    pub n_candidates: usize,
    pub n_splits: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            test_fraction: DEFAULT_TEST_FRACTION,
            stopwords: None,
            stemming: true,
            params: PipelineParams {
                gbdt: GbdtHyperparams {
                    seed: DEFAULT_SEED,
                    ..Default::default()
                },
                ..Default::default()
            },
            n_candidates: DEFAULT_N_CANDIDATES,
            n_splits: DEFAULT_N_SPLITS,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    test_fraction: Option<f64>,
    #[serde(default)]
    preprocess: RawPreprocess,
    #[serde(default)]
    vectorize: RawVectorize,
    #[serde(default)]
    tfidf: RawTfidf,
    #[serde(default)]
    select: RawSelect,
    #[serde(default)]
    gbdt: RawGbdt,
    #[serde(default)]
    tune: RawTune,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPreprocess {
    stopwords: Option<PathBuf>,
    stemming: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVectorize {
    min_df: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTfidf {
    smoothing_mode: Option<String>,
    norm: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelect {
    k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGbdt {
    n_iterations: Option<usize>,
    learning_rate: Option<f64>,
    max_depth: Option<usize>,
    min_samples_leaf: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTune {
    n_candidates: Option<usize>,
    n_splits: Option<usize>,
}

impl RunConfig {
    /// Parses config text; `base` anchors relative paths.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = RunConfig::default();
        if let Some(seed) = raw.seed {
            c.set_seed(seed);
        }
        c.test_fraction = raw.test_fraction.unwrap_or(c.test_fraction);
        c.stopwords = raw.preprocess.stopwords.map(|p| base.join(p));
        c.stemming = raw.preprocess.stemming.unwrap_or(c.stemming);
        let p = &mut c.params;
        p.min_df = raw.vectorize.min_df.unwrap_or(p.min_df);
        if let Some(mode) = raw.tfidf.smoothing_mode {
            p.idf_mode = IdfMode::parse(&mode)?;
        }
        if let Some(norm) = raw.tfidf.norm {
            p.norm = Norm::parse(&norm)?;
        }
        p.k = raw.select.k.unwrap_or(p.k);
        p.gbdt.n_iterations = raw.gbdt.n_iterations.unwrap_or(p.gbdt.n_iterations);
        p.gbdt.learning_rate = raw.gbdt.learning_rate.unwrap_or(p.gbdt.learning_rate);
        p.gbdt.max_depth = raw.gbdt.max_depth.unwrap_or(p.gbdt.max_depth);
        p.gbdt.min_samples_leaf = raw.gbdt.min_samples_leaf.unwrap_or(p.gbdt.min_samples_leaf);
        c.n_candidates = raw.tune.n_candidates.unwrap_or(c.n_candidates);
        c.n_splits = raw.tune.n_splits.unwrap_or(c.n_splits);
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base).map_err(|e| e.in_stage(format!("config {}", path.display())))
    }

    /// Sets the run seed, which also seeds the classifier.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.params.gbdt.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.params.min_df < 1 {
            return Err(Error::Config("vectorize.min_df must be >= 1".into()));
        }
        if self.params.k < 1 {
            return Err(Error::Config("select.k must be >= 1".into()));
        }
        if self.n_candidates < 1 {
            return Err(Error::Config("tune.n_candidates must be >= 1".into()));
        }
        if self.n_splits < 2 {
            return Err(Error::Config("tune.n_splits must be >= 2".into()));
        }
        self.params.gbdt.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let stopwords = match &self.stopwords {
            Some(path) => StopwordList::load(path)?,
            None => StopwordList::default(),
        };
        Ok(PreprocessConfig {
            stopwords,
            stemming: self.stemming,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("", Path::new(".")).unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let text = "seed = 7\n[select]\nk = 50\n[gbdt]\nlearning_rate = 0.3\n[tfidf]\nsmoothing_mode = \"smoothed\"\n\
                    [preprocess]\nstopwords = \"stop.txt\"\n[tune]\nn_splits = 3\n";
        let c = RunConfig::from_toml(text, Path::new("/etc/dlp")).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.params.gbdt.seed, 7);
        assert_eq!(c.params.k, 50);
        assert_eq!(c.params.gbdt.learning_rate, 0.3);
        assert_eq!(c.params.idf_mode, IdfMode::Smoothed);
        assert_eq!(c.stopwords.as_deref(), Some(Path::new("/etc/dlp/stop.txt")));
        assert_eq!(c.n_splits, 3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for bad in [
            "[gbdt]\nsubsample = 0.5",
            "colour = 1",
            "[gbdt]\nlearning_rate = 0.0",
            "[tune]\nn_splits = 1",
            "test_fraction = 1.0",
            "[tfidf]\nnorm = \"l1\"",
            "[select]\nk = 0",
        ] {
            assert!(RunConfig::from_toml(bad, Path::new(".")).is_err(), "{bad}");
        }
    }
}
