//! `revaccess` — review accessibility classification pipeline.
//!
//! One binary with subcommands for each pipeline stage: crawl review
//! pages, preprocess datasets, split, train the classifier, extract
//! keyword candidates, predict, and evaluate. Exit codes: 0 success,
//! 1 domain error, 2 usage error. Diagnostics go to stderr; data goes to
//! files or stdout.

mod config;
mod providers;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use revaccess::classifier::{init_model, load_model, save_model, train, TrainConfig};
use revaccess::corpus::{
    class_balance, load_reviews, save_reviews, stratified_split, write_line_records,
    write_reviews, DatasetFormat, LabeledDataset,
};
use revaccess::crawler::{crawl, CrawlConfig, HttpFetcher};
use revaccess::embedding::{embed_batch, save_embeddings, ConcatEmbedder};
use revaccess::evaluation::{
    ablation_report, evaluate_variant, render_ablation, render_text_table, Variant,
};
use revaccess::hybrid::{classify_review, HybridConfig, Pipeline, PredictionRecord};
use revaccess::keywords::{extract_candidates, load_keyword_sets, KeywordSets};
use revaccess::preprocess::{
    load_lexicon, preprocess_dataset, PreprocessConfig, SpellCorrection,
};

#[derive(Parser)]
#[command(
    name = "revaccess",
    version,
    about = "Detect accessibility-related issues in app reviews"
)]
struct Cli {
    /// Path to a TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed for split/train reproducibility.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest review pages into raw review records.
    Crawl(CrawlArgs),
    /// Clean a dataset: spell-correct, normalize, filter, dedup.
    Preprocess(PreprocessArgs),
    /// Stratified train/test split of a labeled dataset.
    Split(SplitArgs),
    /// Embed reviews and train the classifier.
    Train(TrainArgs),
    /// Rank discriminative keyword candidates from a labeled dataset.
    ExtractKeywords(ExtractKeywordsArgs),
    /// Classify reviews with the hybrid decision rule.
    Predict(PredictArgs),
    /// Score a variant (or the hybrid-vs-no-keywords ablation) on a test set.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct CrawlArgs {
    /// Seed URLs to fetch.
    #[arg(long = "seeds", num_args = 1.., value_name = "URL")]
    seeds: Vec<String>,
    /// Selector for review containers.
    #[arg(long)]
    selector: Option<String>,
    /// Selector for bullet items within a container.
    #[arg(long)]
    item_selector: Option<String>,
    /// Delay between requests to the same host (milliseconds).
    #[arg(long)]
    delay_ms: Option<u64>,
    #[arg(long)]
    max_pages: Option<usize>,
    #[arg(long)]
    user_agent: Option<String>,
    /// Output file (LINE_RECORDS); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    /// Input format override: csv or jsonl (default: by extension).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    min_words: Option<usize>,
    /// off or lexicon.
    #[arg(long)]
    spell_correction: Option<String>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Disable duplicate removal.
    #[arg(long)]
    no_dedup: bool,
    /// Output dataset file; stdout (jsonl) when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the JSON removal report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    test_count: Option<usize>,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled, preprocessed dataset.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Embedding provider spec (hash | hash:<dim>:<seed>,... |
    /// service:<url>[@dim] | table:<path>).
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    model_out: PathBuf,
    /// Also write the computed embeddings, keyed by review id.
    #[arg(long)]
    cache_embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractKeywordsArgs {
    /// Labeled dataset to mine.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value_t = 3)]
    max_n: usize,
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Dataset to classify (labels optional).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    model: PathBuf,
    /// Directory with accessibility.txt and developer.txt; built-in
    /// defaults when omitted.
    #[arg(long)]
    keywords: Option<PathBuf>,
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Disable the keyword fallback.
    #[arg(long)]
    no_keywords: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labeled test dataset.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    keywords: Option<PathBuf>,
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// hybrid, no-keywords, model-only, or both (hybrid + ablation).
    #[arg(long, default_value = "hybrid")]
    variant: String,
    /// json or text.
    #[arg(long = "report-format", default_value = "json")]
    report_format: String,
    /// Append published reference rows to text output.
    #[arg(long)]
    with_reference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    std::process::exit(run(std::env::args().collect()));
}

fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    match cli.command {
        Command::Crawl(args) => cmd_crawl(args, &config),
        Command::Preprocess(args) => cmd_preprocess(args, &config),
        Command::Split(args) => cmd_split(args, &config, seed),
        Command::Train(args) => cmd_train(args, &config, seed),
        Command::ExtractKeywords(args) => cmd_extract_keywords(args),
        Command::Predict(args) => cmd_predict(args, &config),
        Command::Evaluate(args) => cmd_evaluate(args, &config),
    }
}

fn parse_format(flag: &Option<String>, path: &Path) -> anyhow::Result<DatasetFormat> {
    match flag.as_deref() {
        None => Ok(DatasetFormat::from_path(path)),
        Some("csv") => Ok(DatasetFormat::DelimitedTable),
        Some("jsonl") => Ok(DatasetFormat::LineRecords),
        Some(other) => bail!("unknown format {other:?} (expected csv or jsonl)"),
    }
}

/// Writes to the given path, or stdout when absent.
fn open_output(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            Ok(Box::new(file))
        }
        None => Ok(Box::new(std::io::stdout())),
    }
}

fn load_dataset(
    path: &Path,
    format: &Option<String>,
) -> anyhow::Result<(LabeledDataset, DatasetFormat)> {
    let format = parse_format(format, path)?;
    let dataset = load_reviews(path, format)?;
    Ok((dataset, format))
}

fn build_embedder_from(
    flag: &Option<String>,
    config: &RunConfig,
) -> anyhow::Result<ConcatEmbedder> {
    let spec = flag
        .clone()
        .or_else(|| config.embedder.clone())
        .unwrap_or_else(|| "hash".to_string());
    providers::build_embedder(&spec)
}

fn load_keywords_from(
    flag: &Option<PathBuf>,
    config: &RunConfig,
) -> anyhow::Result<KeywordSets> {
    match flag.clone().or_else(|| config.keywords_dir.clone()) {
        Some(dir) => Ok(load_keyword_sets(&dir)?),
        None => Ok(KeywordSets::defaults()),
    }
}

fn load_model_checked(path: &Path) -> anyhow::Result<revaccess::classifier::MlpModel> {
    if !path.exists() {
        bail!("model not found: {}", path.display());
    }
    Ok(load_model(path)?)
}

fn cmd_crawl(args: CrawlArgs, config: &RunConfig) -> anyhow::Result<()> {
    let section = &config.crawl;
    let defaults = CrawlConfig::default();
    let seeds = if args.seeds.is_empty() {
        section.seeds.clone().unwrap_or_default()
    } else {
        args.seeds
    };
    let crawl_config = CrawlConfig {
        seed_urls: seeds,
        review_selector: args
            .selector
            .or_else(|| section.review_selector.clone())
            .unwrap_or(defaults.review_selector),
        item_selector: args
            .item_selector
            .or_else(|| section.item_selector.clone())
            .unwrap_or(defaults.item_selector),
        delay_ms: args.delay_ms.or(section.delay_ms).unwrap_or(1000),
        user_agent: args
            .user_agent
            .or_else(|| section.user_agent.clone())
            .unwrap_or(defaults.user_agent),
        max_pages: args.max_pages.or(section.max_pages).unwrap_or(10),
    };
    let fetcher = HttpFetcher::new(crawl_config.user_agent.clone());
    let outcome = crawl(&crawl_config, &fetcher)?;
    for diagnostic in &outcome.diagnostics {
        eprintln!("crawl: {diagnostic}");
    }
    eprintln!(
        "crawl: {} records from {} pages",
        outcome.records.len(),
        outcome.pages_fetched
    );
    let mut out = open_output(&args.out)?;
    write_line_records(&outcome.records, &mut out)?;
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs, config: &RunConfig) -> anyhow::Result<()> {
    let (dataset, _) = load_dataset(&args.input, &args.format)?;
    let section = &config.preprocess;
    let spell = match args
        .spell_correction
        .or_else(|| section.spell_correction.clone())
        .as_deref()
    {
        None => SpellCorrection::Off,
        Some(s) => match s.to_ascii_lowercase().as_str() {
            "off" => SpellCorrection::Off,
            "lexicon" => SpellCorrection::Lexicon,
            other => bail!("unknown spell-correction mode {other:?}"),
        },
    };
    let preprocess_config = PreprocessConfig {
        min_words: args.min_words.or(section.min_words).unwrap_or(5),
        spell_correction: spell,
        lexicon_path: args.lexicon.or_else(|| section.lexicon_path.clone()),
        dedup: if args.no_dedup {
            false
        } else {
            section.dedup.unwrap_or(true)
        },
    };
    let (cleaned, report) = preprocess_dataset(&dataset, &preprocess_config)?;

    match &args.out {
        Some(path) => {
            save_reviews(&cleaned, path, DatasetFormat::from_path(path))?;
        }
        None => {
            let mut stdout = std::io::stdout();
            write_reviews(&cleaned, &mut stdout, DatasetFormat::LineRecords)?;
        }
    }
    let report_json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => std::fs::write(path, report_json + "\n")?,
        None => eprintln!("{report_json}"),
    }
    Ok(())
}

fn cmd_split(args: SplitArgs, config: &RunConfig, seed: u64) -> anyhow::Result<()> {
    let (dataset, _) = load_dataset(&args.input, &args.format)?;
    let test_count = args
        .test_count
        .or(config.split.test_count)
        .ok_or_else(|| anyhow!("--test-count is required (or [split] test_count in config)"))?;
    let (train_set, test_set) = stratified_split(&dataset, test_count, seed)?;
    save_reviews(&train_set, &args.train_out, DatasetFormat::from_path(&args.train_out))?;
    save_reviews(&test_set, &args.test_out, DatasetFormat::from_path(&args.test_out))?;
    let train_balance = class_balance(&train_set)?;
    let test_balance = class_balance(&test_set)?;
    eprintln!(
        "split: train/val {} ({} positive), test {} ({} positive)",
        train_balance.total, train_balance.positives, test_balance.total, test_balance.positives
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, config: &RunConfig, seed: u64) -> anyhow::Result<()> {
    let (dataset, _) = load_dataset(&args.input, &args.format)?;
    let embedder = build_embedder_from(&args.embedder, config)?;
    let section = &config.train;
    let train_config = TrainConfig {
        epochs: args.epochs.or(section.epochs).unwrap_or(3),
        learning_rate: args
            .learning_rate
            .or(section.learning_rate)
            .unwrap_or(0.005),
        batch_size: args.batch_size.or(section.batch_size).unwrap_or(32),
        val_fraction: args.val_fraction.or(section.val_fraction).unwrap_or(0.1),
        seed,
        ..TrainConfig::default()
    };

    let texts: Vec<&str> = dataset.reviews.iter().map(|r| r.text.as_str()).collect();
    let vectors = embed_batch(&embedder, &texts)?;
    let mut data = Vec::with_capacity(vectors.len());
    for (review, vector) in dataset.reviews.iter().zip(vectors.iter()) {
        let label = review
            .label
            .ok_or_else(|| anyhow!("review {:?} is unlabeled; training needs labels", review.id))?;
        data.push((vector.clone(), label));
    }

    if let Some(cache) = &args.cache_embeddings {
        let records: Vec<(String, Vec<f64>)> = dataset
            .reviews
            .iter()
            .zip(vectors.iter())
            .map(|(r, v)| (r.id.clone(), v.values.clone()))
            .collect();
        save_embeddings(cache, embedder.total_dim(), &records)?;
    }

    let model = init_model_for_dim(embedder.total_dim(), seed)?;
    let (trained, history) = train(&model, &data, &train_config)?;
    for (i, epoch) in history.iter().enumerate() {
        match epoch.val_accuracy {
            Some(acc) => eprintln!(
                "epoch {}: train_loss {:.4}, val_accuracy {:.4}",
                i + 1,
                epoch.train_loss,
                acc
            ),
            None => eprintln!("epoch {}: train_loss {:.4}", i + 1, epoch.train_loss),
        }
    }
    save_model(&trained, &args.model_out)?;
    eprintln!("model written to {}", args.model_out.display());
    Ok(())
}

fn init_model_for_dim(dim: usize, seed: u64) -> anyhow::Result<revaccess::classifier::MlpModel> {
    let expected = revaccess::classifier::DEFAULT_LAYER_DIMS[0];
    if dim != expected {
        bail!(
            "embedder produces {dim}-dimensional vectors but the classifier expects {expected}; \
             use providers totalling {expected} dims"
        );
    }
    Ok(init_model(seed))
}

fn cmd_extract_keywords(args: ExtractKeywordsArgs) -> anyhow::Result<()> {
    let (dataset, _) = load_dataset(&args.input, &args.format)?;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for review in &dataset.reviews {
        match review.label {
            Some(1) => pos.push(review.text.as_str()),
            Some(_) => neg.push(review.text.as_str()),
            None => bail!("review {:?} is unlabeled; extraction needs labels", review.id),
        }
    }
    let candidates = extract_candidates(&pos, &neg, args.max_n, args.top_k)?;
    let mut out = open_output(&args.out)?;
    write_line_records(&candidates, &mut out)?;
    Ok(())
}

fn build_pipeline<'a>(
    embedder: &'a ConcatEmbedder,
    model: &'a revaccess::classifier::MlpModel,
    keywords: &'a KeywordSets,
    threshold: Option<f64>,
    keywords_enabled: bool,
    config: &RunConfig,
    lexicon: Option<&'a std::collections::HashSet<String>>,
) -> anyhow::Result<Pipeline<'a>> {
    if embedder.total_dim() != model.input_dim() {
        bail!(
            "embedder dim {} does not match model input dim {}",
            embedder.total_dim(),
            model.input_dim()
        );
    }
    let hybrid = HybridConfig {
        confidence_threshold: threshold
            .or(config.hybrid.confidence_threshold)
            .unwrap_or(0.80),
        keywords_enabled: keywords_enabled && config.hybrid.keywords_enabled.unwrap_or(true),
    };
    hybrid.validate()?;
    Ok(Pipeline {
        embedder,
        model,
        keywords,
        hybrid,
        lexicon,
    })
}

fn cmd_predict(args: PredictArgs, config: &RunConfig) -> anyhow::Result<()> {
    let (dataset, _) = load_dataset(&args.input, &args.format)?;
    let model = load_model_checked(&args.model)?;
    let embedder = build_embedder_from(&args.embedder, config)?;
    let keywords = load_keywords_from(&args.keywords, config)?;
    let lexicon = match (&config.preprocess.spell_correction, &config.preprocess.lexicon_path) {
        (Some(mode), Some(path)) if mode.eq_ignore_ascii_case("lexicon") => {
            Some(load_lexicon(path)?)
        }
        _ => None,
    };
    let pipeline = build_pipeline(
        &embedder,
        &model,
        &keywords,
        args.threshold,
        !args.no_keywords,
        config,
        lexicon.as_ref(),
    )?;

    let mut records = Vec::with_capacity(dataset.reviews.len());
    for review in &dataset.reviews {
        let prediction = classify_review(&review.text, &pipeline)
            .with_context(|| format!("review {:?}", review.id))?;
        records.push(PredictionRecord::new(review.id.clone(), &prediction));
    }
    let mut out = open_output(&args.out)?;
    write_line_records(&records, &mut out)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, config: &RunConfig) -> anyhow::Result<()> {
    let (test, _) = load_dataset(&args.test, &args.format)?;
    let model = load_model_checked(&args.model)?;
    let embedder = build_embedder_from(&args.embedder, config)?;
    let keywords = load_keywords_from(&args.keywords, config)?;
    let pipeline = build_pipeline(
        &embedder,
        &model,
        &keywords,
        args.threshold,
        true,
        config,
        None,
    )?;

    let mut out = open_output(&args.out)?;
    let as_text = match args.report_format.as_str() {
        "json" => false,
        "text" => true,
        other => bail!("unknown report format {other:?} (expected json or text)"),
    };

    match args.variant.as_str() {
        "hybrid" | "no-keywords" | "model-only" => {
            let variant = match args.variant.as_str() {
                "hybrid" => Variant::Hybrid,
                "no-keywords" => Variant::NoKeywords,
                _ => Variant::ModelOnly,
            };
            let report = evaluate_variant(variant, &pipeline, &test)?;
            if as_text {
                write!(
                    out,
                    "{}",
                    render_text_table(&[(args.variant.as_str(), &report)], args.with_reference)
                )?;
            } else {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            }
        }
        "both" => {
            let hybrid = evaluate_variant(Variant::Hybrid, &pipeline, &test)?;
            let no_keywords = evaluate_variant(Variant::NoKeywords, &pipeline, &test)?;
            let ablation = ablation_report(&hybrid, &no_keywords)?;
            if as_text {
                write!(
                    out,
                    "{}",
                    render_text_table(
                        &[("hybrid", &hybrid), ("no-keywords", &no_keywords)],
                        args.with_reference
                    )
                )?;
                writeln!(out)?;
                write!(out, "{}", render_ablation(&ablation))?;
            } else {
                let combined = serde_json::json!({
                    "hybrid": hybrid,
                    "no_keywords": no_keywords,
                    "ablation": ablation,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&combined)?)?;
            }
        }
        other => bail!("unknown variant {other:?} (expected hybrid, no-keywords, model-only, or both)"),
    }
    Ok(())
}
