//! Confidence-gated fusion of the model prediction and the keyword sets,
//! plus the end-to-end single-review pipeline.
//!
//! The decision rule: when the model's confidence strictly exceeds the
//! threshold, its label stands. Otherwise the keyword fallback runs — an
//! accessibility-term match forces label 1, else a developer-term match
//! forces label 0, else the model's label is retained. The accessibility
//! set is checked first, so it wins when both sets match.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{predict, ClassifierError, MlpModel, ModelPrediction};
use crate::embedding::{concat_embed, ConcatEmbedder, EmbeddingError};
use crate::keywords::{match_keywords, KeywordSets};
use crate::preprocess::{correct_spelling, normalize};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("confidence threshold {0} must lie in (0.5, 1]")]
    BadThreshold(f64),
    #[error("review is empty after normalization")]
    EmptyAfterNormalization,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Tuning for the decision rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridConfig {
    pub confidence_threshold: f64,
    pub keywords_enabled: bool,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.80,
            keywords_enabled: true,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<(), HybridError> {
        if self.confidence_threshold > 0.5 && self.confidence_threshold <= 1.0 {
            Ok(())
        } else {
            Err(HybridError::BadThreshold(self.confidence_threshold))
        }
    }
}

/// Which branch of the decision rule produced the final label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionPath {
    ModelConfident,
    KeywordAccessibility,
    KeywordDeveloper,
    ModelFallback,
}

/// Final label with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPrediction {
    pub label: u8,
    /// The model's confidence (max softmax probability), regardless of
    /// which branch decided.
    pub confidence: f64,
    pub decision_path: DecisionPath,
    pub matched_keywords: Vec<String>,
    pub model_probabilities: [f64; 2],
}

/// Applies the confidence-gated rule to a model prediction and the
/// normalized review text.
pub fn decide(
    model_pred: &ModelPrediction,
    text: &str,
    sets: &KeywordSets,
    config: &HybridConfig,
) -> HybridPrediction {
    let base = |label: u8, path: DecisionPath, matched: Vec<String>| HybridPrediction {
        label,
        confidence: model_pred.confidence,
        decision_path: path,
        matched_keywords: matched,
        model_probabilities: model_pred.probabilities,
    };
    if model_pred.confidence > config.confidence_threshold {
        return base(model_pred.label, DecisionPath::ModelConfident, Vec::new());
    }
    if config.keywords_enabled {
        let accessibility = match_keywords(text, &sets.accessibility_terms);
        if !accessibility.is_empty() {
            return base(1, DecisionPath::KeywordAccessibility, accessibility);
        }
        let developer = match_keywords(text, &sets.developer_terms);
        if !developer.is_empty() {
            return base(0, DecisionPath::KeywordDeveloper, developer);
        }
    }
    base(model_pred.label, DecisionPath::ModelFallback, Vec::new())
}

/// Everything needed to classify raw review text.
pub struct Pipeline<'a> {
    pub embedder: &'a ConcatEmbedder,
    pub model: &'a MlpModel,
    pub keywords: &'a KeywordSets,
    pub hybrid: HybridConfig,
    /// Optional spelling lexicon applied before normalization.
    pub lexicon: Option<&'a std::collections::HashSet<String>>,
}

/// Runs one review through the full pipeline: (optional spell-correct) →
/// normalize → embed → predict → decide.
pub fn classify_review(
    raw_text: &str,
    pipeline: &Pipeline<'_>,
) -> Result<HybridPrediction, HybridError> {
    pipeline.hybrid.validate()?;
    let corrected = match pipeline.lexicon {
        Some(lexicon) => correct_spelling(raw_text, lexicon),
        None => raw_text.to_string(),
    };
    let text = normalize(&corrected);
    if text.is_empty() {
        return Err(HybridError::EmptyAfterNormalization);
    }
    let embedding = concat_embed(pipeline.embedder, &text)?;
    let model_pred = predict(pipeline.model, &embedding)?;
    Ok(decide(&model_pred, &text, pipeline.keywords, &pipeline.hybrid))
}

/// One LINE_RECORDS row of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: u8,
    pub confidence: f64,
    pub decision_path: DecisionPath,
    pub matched_keywords: Vec<String>,
    pub p0: f64,
    pub p1: f64,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, prediction: &HybridPrediction) -> Self {
        Self {
            id: id.into(),
            label: prediction.label,
            confidence: prediction.confidence,
            decision_path: prediction.decision_path,
            matched_keywords: prediction.matched_keywords.clone(),
            p0: prediction.model_probabilities[0],
            p1: prediction.model_probabilities[1],
        }
    }
}
