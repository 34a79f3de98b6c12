//! Detection of accessibility-related issues in low-code app reviews.
//!
//! The crate implements a hybrid classification pipeline: reviews are
//! normalized, embedded by two concatenated sentence-embedding providers,
//! scored by a five-layer MLP, and — when the model's confidence is low —
//! routed through a curated keyword fallback. Supporting machinery covers
//! review crawling, dataset preprocessing and splitting, keyword curation,
//! and a metrics harness for hybrid-vs-ablation comparisons.
//!
//! Module map:
//! - [`corpus`] — review records, dataset I/O, stratified splitting
//! - [`crawler`] — robots-compliant review harvesting with injected fetchers
//! - [`preprocess`] — spell correction, normalization, filtering, dedup
//! - [`embedding`] — pluggable providers and the concatenation scheme
//! - [`classifier`] — the MLP, its training loop, and model persistence
//! - [`keywords`] — keyword sets, matching, and candidate extraction
//! - [`hybrid`] — the confidence-gated decision rule and full pipeline
//! - [`evaluation`] — confusion-matrix metrics and ablation reports

pub mod classifier;
pub mod corpus;
pub mod crawler;
pub mod embedding;
pub mod evaluation;
pub mod hybrid;
pub mod keywords;
pub mod preprocess;
