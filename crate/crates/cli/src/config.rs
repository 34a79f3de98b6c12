//! Run configuration: one TOML file with a section per module, merged
//! with command-line flag overrides (flags win). Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed for the split → train → evaluate chain.
    pub seed: Option<u64>,
    /// Embedding provider spec (see `providers::build_embedder`).
    pub embedder: Option<String>,
    /// Directory holding keyword set files.
    pub keywords_dir: Option<PathBuf>,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub hybrid: HybridSection,
    #[serde(default)]
    pub crawl: CrawlSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    pub min_words: Option<usize>,
    /// "off" or "lexicon".
    pub spell_correction: Option<String>,
    pub lexicon_path: Option<PathBuf>,
    pub dedup: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub test_count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSection {
    pub confidence_threshold: Option<f64>,
    pub keywords_enabled: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlSection {
    pub seeds: Option<Vec<String>>,
    pub review_selector: Option<String>,
    pub item_selector: Option<String>,
    pub delay_ms: Option<u64>,
    pub user_agent: Option<String>,
    pub max_pages: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let content = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&content).with_context(|| format!("invalid config {}", path.display()))
    }
}
