//! Document-sensitivity classification for data-loss prevention.
//!
//! Raw documents are normalised into stemmed tokens, counted over a
//! bag-of-words vocabulary, weighted with TF-IDF, reduced to the k columns
//! with the highest chi-squared score and classified by a multi-class
//! gradient-boosted tree ensemble. [`tune`] wraps that pipeline in stratified
//! k-fold randomized search, [`evaluate`] computes confusion-matrix metrics
//! and [`policy`] turns a predicted class into an enforcement action.

pub mod error;
pub mod bundle;
pub mod cli;
pub mod config;
pub mod evaluate;
pub mod gbdt;
pub mod ingest;
pub mod pipeline;
pub mod policy;
pub mod preprocess;
pub mod select;
pub mod sparse;
pub mod synth;
pub mod tfidf;
pub mod tune;
pub mod vectorize;

mod rng;

pub use error::{Error, Result};
pub use ingest::{ClassLabel, Corpus, LabeledDocument};
