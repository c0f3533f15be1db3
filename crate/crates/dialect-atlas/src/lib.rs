//! Dialect-sensitive word representations for geo-tagged text.
//!
//! This crate trains word embeddings on a geo-tagged corpus and detects
//! regional meaning shifts at any geographic resolution chosen after
//! training. Four scoring models are provided:
//!
//! - **Frequency**: absolute log relative-frequency ratio between two regions.
//! - **Syntactic**: Jensen-Shannon divergence between a word's POS-tag
//!   distributions in two regions (requires a tagged corpus).
//! - **Geodist**: region-conditioned skip-gram embeddings (a global vector
//!   plus per-region differentials) trained with negative sampling; scored
//!   by cross-region embedding distance.
//! - **DialectGram**: region-agnostic multi-sense embeddings with a
//!   Dirichlet-process prior over senses. Region-specific vectors are
//!   composed post-hoc by disambiguating each occurrence in a region and
//!   averaging sense vectors, so one training run serves every resolution.
//!
//! The [`synth`] module generates corpora with planted region-dependent
//! senses and serves as the ground-truth oracle for the test suite. The
//! [`evaluate`] module fits a threshold classifier on a labeled lexicon and
//! reports accuracy/precision/recall/F1.

pub mod adagram;
pub mod baselines;
mod binio;
pub mod cli;
pub mod corpus;
pub mod dialectgram;
mod error;
pub mod evaluate;
pub mod geodist;
mod hogwild;
pub mod huffman;
pub mod metric;
pub mod synth;

pub use error::{Error, Result};
pub use metric::Metric;
