//! Curated keyword sets, whole-token matching, and discriminative
//! candidate extraction for keyword curation.
//!
//! Two term lists drive the hybrid fallback: accessibility-indicative
//! phrases (label 1) and developer-side phrases (label 0). Phrases are
//! normalized 1–3-grams and the two sets must be disjoint. The on-disk
//! form is a directory with `accessibility.txt` and `developer.txt`, one
//! phrase per line, `#` comments ignored.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::normalize;

const ACCESSIBILITY_FILE: &str = "accessibility.txt";
const DEVELOPER_FILE: &str = "developer.txt";

const DEFAULT_ACCESSIBILITY: &str = include_str!("../data/keywords/accessibility.txt");
const DEFAULT_DEVELOPER: &str = include_str!("../data/keywords/developer.txt");

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("phrase {phrase:?} appears in both keyword sets")]
    Overlap { phrase: String },
    #[error("phrase {phrase:?} in {file} is not normalized")]
    NotNormalized { phrase: String, file: String },
    #[error("phrase {phrase:?} in {file} has {words} words (1-3 allowed)")]
    BadLength {
        phrase: String,
        file: String,
        words: usize,
    },
    #[error("positive corpus is empty")]
    EmptyPositiveCorpus,
}

/// The two curated term lists of the hybrid fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSets {
    pub accessibility_terms: Vec<String>,
    pub developer_terms: Vec<String>,
}

impl KeywordSets {
    /// Validates normalization, phrase length, and disjointness.
    pub fn new(
        accessibility_terms: Vec<String>,
        developer_terms: Vec<String>,
    ) -> Result<Self, KeywordError> {
        validate_terms(&accessibility_terms, ACCESSIBILITY_FILE)?;
        validate_terms(&developer_terms, DEVELOPER_FILE)?;
        let developer_set: HashSet<&String> = developer_terms.iter().collect();
        if let Some(phrase) = accessibility_terms.iter().find(|p| developer_set.contains(p)) {
            return Err(KeywordError::Overlap {
                phrase: phrase.clone(),
            });
        }
        Ok(Self {
            accessibility_terms,
            developer_terms,
        })
    }

    /// The checked-in default sets, curated around user-interface,
    /// navigation, customization, and usability vocabulary on the
    /// accessibility side and API, database, integration, and automation
    /// vocabulary on the developer side.
    pub fn defaults() -> Self {
        Self::new(
            parse_term_lines(DEFAULT_ACCESSIBILITY),
            parse_term_lines(DEFAULT_DEVELOPER),
        )
        .expect("default keyword sets are valid")
    }
}

fn validate_terms(terms: &[String], file: &str) -> Result<(), KeywordError> {
    for phrase in terms {
        if phrase.is_empty() || normalize(phrase) != *phrase {
            return Err(KeywordError::NotNormalized {
                phrase: phrase.clone(),
                file: file.to_string(),
            });
        }
        let words = phrase.split(' ').count();
        if !(1..=3).contains(&words) {
            return Err(KeywordError::BadLength {
                phrase: phrase.clone(),
                file: file.to_string(),
                words,
            });
        }
    }
    Ok(())
}

fn parse_term_lines(content: &str) -> Vec<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Loads keyword sets from a directory holding `accessibility.txt` and
/// `developer.txt`. Disjointness and normalization are validated.
pub fn load_keyword_sets(dir: &Path) -> Result<KeywordSets, KeywordError> {
    let read = |name: &str| -> Result<Vec<String>, KeywordError> {
        let path = dir.join(name);
        let content = std::fs::read_to_string(&path)
            .map_err(|source| KeywordError::Io { path, source })?;
        Ok(parse_term_lines(&content))
    };
    KeywordSets::new(read(ACCESSIBILITY_FILE)?, read(DEVELOPER_FILE)?)
}

/// Writes keyword sets into a directory; the inverse of
/// [`load_keyword_sets`].
pub fn save_keyword_sets(sets: &KeywordSets, dir: &Path) -> Result<(), KeywordError> {
    std::fs::create_dir_all(dir).map_err(|source| KeywordError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let write = |name: &str, terms: &[String]| -> Result<(), KeywordError> {
        let path = dir.join(name);
        let mut content = terms.join("\n");
        content.push('\n');
        std::fs::write(&path, content).map_err(|source| KeywordError::Io { path, source })
    };
    write(ACCESSIBILITY_FILE, &sets.accessibility_terms)?;
    write(DEVELOPER_FILE, &sets.developer_terms)
}

/// Finds the terms whose token sequences appear contiguously in the
/// normalized text's token sequence (whole-token matching). Results keep
/// term-list order and are deduplicated.
///
/// The text is expected to be normalized already; matching is
/// case-insensitive by that prior normalization.
pub fn match_keywords(text: &str, terms: &[String]) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut matched = Vec::new();
    for term in terms {
        if matched.contains(term) {
            continue;
        }
        let term_tokens: Vec<&str> = term.split_whitespace().collect();
        if term_tokens.is_empty() || term_tokens.len() > tokens.len() {
            continue;
        }
        let hit = tokens
            .windows(term_tokens.len())
            .any(|window| window == term_tokens.as_slice());
        if hit {
            matched.push(term.clone());
        }
    }
    matched
}

/// A scored n-gram candidate for keyword curation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordCandidate {
    pub phrase: String,
    pub score: f64,
    pub pos_freq: usize,
    pub neg_freq: usize,
}

/// Ranks candidate phrases that discriminate the positive corpus from the
/// negative one.
///
/// All 1..=`max_n`-grams of the normalized positive texts are scored as
/// `(pos_freq / (neg_freq + 1)) * ln(1 + pos_freq)`; the top `top_k` by
/// descending score are returned, ties broken lexicographically.
pub fn extract_candidates(
    pos_texts: &[impl AsRef<str>],
    neg_texts: &[impl AsRef<str>],
    max_n: usize,
    top_k: usize,
) -> Result<Vec<KeywordCandidate>, KeywordError> {
    if pos_texts.is_empty() {
        return Err(KeywordError::EmptyPositiveCorpus);
    }
    let pos_counts = ngram_counts(pos_texts, max_n);
    let neg_counts = ngram_counts(neg_texts, max_n);

    let mut candidates: Vec<KeywordCandidate> = pos_counts
        .into_iter()
        .map(|(phrase, pos_freq)| {
            let neg_freq = neg_counts.get(&phrase).copied().unwrap_or(0);
            let score = (pos_freq as f64 / (neg_freq as f64 + 1.0))
                * (1.0 + pos_freq as f64).ln();
            KeywordCandidate {
                phrase,
                score,
                pos_freq,
                neg_freq,
            }
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.phrase.cmp(&b.phrase))
    });
    candidates.truncate(top_k);
    Ok(candidates)
}

fn ngram_counts(
    texts: &[impl AsRef<str>],
    max_n: usize,
) -> std::collections::HashMap<String, usize> {
    let mut counts = std::collections::HashMap::new();
    for text in texts {
        let normalized = normalize(text.as_ref());
        let tokens: Vec<&str> = normalized.split_whitespace().collect();
        for n in 1..=max_n {
            if n > tokens.len() {
                break;
            }
            for window in tokens.windows(n) {
                *counts.entry(window.join(" ")).or_insert(0) += 1;
            }
        }
    }
    counts
}
