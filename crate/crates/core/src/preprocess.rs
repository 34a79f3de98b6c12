//! Review cleaning pipeline: spell correction, normalization,
//! minimum-length filtering, and duplicate removal.
//!
//! Stages run in a fixed order: spell-correct (opt-in) → normalize →
//! short-filter → dedup. Deduplication keys on the normalized text, so
//! normalizing first maximizes duplicate detection.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::corpus::LabeledDataset;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("spell correction is enabled but no lexicon path is configured")]
    MissingLexicon,
    #[error("failed to read lexicon {path}: {source}")]
    LexiconIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("lexicon {path} is empty")]
    EmptyLexicon { path: PathBuf },
}

/// Spell-correction stage selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpellCorrection {
    #[default]
    Off,
    /// Deterministic lexicon-based correction: a token is replaced only if
    /// exactly one lexicon word sits at edit distance 1. Never guesses.
    Lexicon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_words: usize,
    pub spell_correction: SpellCorrection,
    pub lexicon_path: Option<PathBuf>,
    pub dedup: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_words: 5,
            spell_correction: SpellCorrection::Off,
            lexicon_path: None,
            dedup: true,
        }
    }
}

/// Per-stage removal tally for one preprocessing run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_count: usize,
    pub corrected_count: usize,
    pub removed_short: usize,
    pub removed_duplicate: usize,
    pub output_count: usize,
}

/// Lowercases, replaces every punctuation or symbol character (Unicode P*
/// and S* categories) with a space, collapses whitespace runs, and trims.
///
/// Idempotent: `normalize(normalize(x)) == normalize(x)`.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let replaced: String = lowered
        .chars()
        .map(|c| {
            match c.general_category_group() {
                GeneralCategoryGroup::Punctuation | GeneralCategoryGroup::Symbol => ' ',
                _ => c,
            }
        })
        .collect();
    replaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of words in `text` after normalization (maximal non-whitespace runs).
pub fn word_count(text: &str) -> usize {
    normalize(text).split_whitespace().count()
}

/// Replaces each out-of-lexicon token by the unique lexicon word at edit
/// distance 1, if exactly one exists. In-lexicon tokens and tokens with
/// zero or multiple candidates pass through unchanged. Token count is
/// preserved.
pub fn correct_spelling(text: &str, lexicon: &HashSet<String>) -> String {
    text.split_whitespace()
        .map(|token| {
            if lexicon.contains(token) {
                return token.to_string();
            }
            let mut candidates = lexicon
                .iter()
                .filter(|word| edit_distance_is_one(token, word));
            match (candidates.next(), candidates.next()) {
                (Some(unique), None) => unique.clone(),
                _ => token.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// True iff the Levenshtein distance between `a` and `b` is exactly 1.
fn edit_distance_is_one(a: &str, b: &str) -> bool {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    match long.len() - short.len() {
        0 => {
            // Exactly one substitution.
            a.iter().zip(b.iter()).filter(|(x, y)| x != y).count() == 1
        }
        1 => {
            // One insertion into the shorter string.
            let mut i = 0;
            let mut j = 0;
            let mut skipped = false;
            while i < short.len() && j < long.len() {
                if short[i] == long[j] {
                    i += 1;
                    j += 1;
                } else if skipped {
                    return false;
                } else {
                    skipped = true;
                    j += 1;
                }
            }
            true
        }
        _ => false,
    }
}

/// Loads a lexicon file: one lowercase word per line, UTF-8, `#` comments
/// and blank lines ignored.
pub fn load_lexicon(path: &Path) -> Result<HashSet<String>, PreprocessError> {
    let content = std::fs::read_to_string(path).map_err(|source| PreprocessError::LexiconIo {
        path: path.to_path_buf(),
        source,
    })?;
    let words: HashSet<String> = content
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(PreprocessError::EmptyLexicon {
            path: path.to_path_buf(),
        });
    }
    Ok(words)
}

/// Runs the full cleaning pipeline over a dataset.
///
/// Per review: optional spell correction on `raw_text`, then normalization
/// into `text`. Reviews shorter than `min_words` are removed, then exact
/// duplicates (by normalized text) are removed keeping the first
/// occurrence. The report tallies each removal class.
pub fn preprocess_dataset(
    dataset: &LabeledDataset,
    config: &PreprocessConfig,
) -> Result<(LabeledDataset, PreprocessReport), PreprocessError> {
    if dataset.reviews.is_empty() {
        return Err(PreprocessError::EmptyDataset);
    }
    let lexicon = match config.spell_correction {
        SpellCorrection::Off => None,
        SpellCorrection::Lexicon => {
            let path = config
                .lexicon_path
                .as_ref()
                .ok_or(PreprocessError::MissingLexicon)?;
            Some(load_lexicon(path)?)
        }
    };
    Ok(preprocess_with_lexicon(dataset, config, lexicon.as_ref()))
}

/// Same as [`preprocess_dataset`] but with an already-loaded lexicon
/// (or `None` to skip spell correction).
pub fn preprocess_with_lexicon(
    dataset: &LabeledDataset,
    config: &PreprocessConfig,
    lexicon: Option<&HashSet<String>>,
) -> (LabeledDataset, PreprocessReport) {
    let input_count = dataset.reviews.len();
    let mut corrected_count = 0;
    let mut removed_short = 0;
    let mut removed_duplicate = 0;

    let mut survivors = Vec::new();
    for review in &dataset.reviews {
        let mut review = review.clone();
        let source_text = match lexicon {
            Some(lexicon) => {
                let corrected = correct_spelling(&review.raw_text, lexicon);
                if corrected != review.raw_text {
                    corrected_count += 1;
                }
                corrected
            }
            None => review.raw_text.clone(),
        };
        review.text = normalize(&source_text);
        if review.text.split_whitespace().count() < config.min_words {
            removed_short += 1;
            continue;
        }
        survivors.push(review);
    }

    let mut output = Vec::with_capacity(survivors.len());
    if config.dedup {
        let mut seen = HashSet::new();
        for review in survivors {
            if seen.insert(review.text.clone()) {
                output.push(review);
            } else {
                removed_duplicate += 1;
            }
        }
    } else {
        output = survivors;
    }

    let report = PreprocessReport {
        input_count,
        corrected_count,
        removed_short,
        removed_duplicate,
        output_count: output.len(),
    };
    let cleaned = LabeledDataset {
        reviews: output,
        provenance: format!("{} [preprocessed]", dataset.provenance),
    };
    (cleaned, report)
}
