//! Library-level pipeline integration: the in-process composition of the
//! stages must agree with the same chain routed through intermediate
//! files.

use revaccess::classifier::{init_model, load_model, save_model, train, TrainConfig};
use revaccess::corpus::{
    class_balance, load_reviews, save_reviews, stratified_split, DatasetFormat, LabeledDataset,
    Review, ReviewSource,
};
use revaccess::embedding::{concat_embed, load_embeddings, save_embeddings, ConcatEmbedder};
use revaccess::evaluation::{ablation_report, evaluate_variant, Variant};
use revaccess::hybrid::{classify_review, HybridConfig, Pipeline};
use revaccess::keywords::KeywordSets;
use revaccess::preprocess::{preprocess_with_lexicon, PreprocessConfig};

fn synthetic_corpus() -> LabeledDataset {
    let accessibility = [
        "screen", "reader", "font", "zoom", "contrast", "blind", "vision", "navigate",
    ];
    let developer = [
        "api", "database", "integration", "deploy", "automation", "pipeline", "endpoint",
        "query",
    ];
    let mut reviews = Vec::new();
    for i in 0..40 {
        for (tag, vocab, label) in [("p", &accessibility, 1u8), ("n", &developer, 0u8)] {
            let words: Vec<String> = (0..7)
                .map(|j| vocab[(i + j * 3) % vocab.len()].to_string())
                .chain([format!("item{i}")])
                .collect();
            let text = words.join(" ");
            reviews.push(Review {
                id: format!("{tag}{i}"),
                source: ReviewSource::Imported,
                app_name: "demo".to_string(),
                raw_text: text.clone(),
                text,
                label: Some(label),
            });
        }
    }
    LabeledDataset {
        reviews,
        provenance: "synthetic pipeline corpus".to_string(),
    }
}

#[test]
fn in_process_chain_matches_file_round_tripped_chain() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus();

    // In-process: preprocess -> split -> embed -> train -> evaluate.
    let (cleaned, report) =
        preprocess_with_lexicon(&corpus, &PreprocessConfig::default(), None);
    assert_eq!(report.output_count, cleaned.reviews.len());
    let (train_set, test_set) = stratified_split(&cleaned, 20, 9).unwrap();
    assert_eq!(test_set.reviews.len(), 20);
    let balance = class_balance(&test_set).unwrap();
    assert_eq!(balance.positives, 10);

    let embedder = ConcatEmbedder::default_hash();
    let data: Vec<_> = train_set
        .reviews
        .iter()
        .map(|r| {
            (
                concat_embed(&embedder, &r.text).unwrap(),
                r.label.unwrap(),
            )
        })
        .collect();
    let config = TrainConfig {
        seed: 9,
        ..TrainConfig::default()
    };
    let (model, _) = train(&init_model(9), &data, &config).unwrap();

    let sets = KeywordSets::defaults();
    let pipeline = Pipeline {
        embedder: &embedder,
        model: &model,
        keywords: &sets,
        hybrid: HybridConfig::default(),
        lexicon: None,
    };
    let hybrid = evaluate_variant(Variant::Hybrid, &pipeline, &test_set).unwrap();
    let no_keywords = evaluate_variant(Variant::NoKeywords, &pipeline, &test_set).unwrap();
    let ablation = ablation_report(&hybrid, &no_keywords).unwrap();
    assert_eq!(ablation.rows.len(), 4);

    // Same chain through files: datasets, model, and embeddings all round
    // trip losslessly, so the evaluation must be identical.
    let clean_path = dir.path().join("clean.csv");
    save_reviews(&cleaned, &clean_path, DatasetFormat::DelimitedTable).unwrap();
    let cleaned_reloaded = load_reviews(&clean_path, DatasetFormat::DelimitedTable).unwrap();
    assert_eq!(cleaned_reloaded.reviews, cleaned.reviews);

    let (train2, test2) = stratified_split(&cleaned_reloaded, 20, 9).unwrap();
    assert_eq!(train2.reviews, train_set.reviews);
    assert_eq!(test2.reviews, test_set.reviews);

    let test_path = dir.path().join("test.jsonl");
    save_reviews(&test2, &test_path, DatasetFormat::LineRecords).unwrap();
    let test_reloaded = load_reviews(&test_path, DatasetFormat::LineRecords).unwrap();

    let model_path = dir.path().join("model.armlp");
    save_model(&model, &model_path).unwrap();
    let model_reloaded = load_model(&model_path).unwrap();
    assert_eq!(model_reloaded, model);

    let pipeline2 = Pipeline {
        embedder: &embedder,
        model: &model_reloaded,
        keywords: &sets,
        hybrid: HybridConfig::default(),
        lexicon: None,
    };
    let hybrid2 = evaluate_variant(Variant::Hybrid, &pipeline2, &test_reloaded).unwrap();
    assert_eq!(hybrid2, hybrid);

    // Embedding cache round trip feeds identical vectors back.
    let cache_path = dir.path().join("test.emb");
    let records: Vec<(String, Vec<f64>)> = test2
        .reviews
        .iter()
        .map(|r| {
            (
                r.id.clone(),
                concat_embed(&embedder, &r.text).unwrap().values,
            )
        })
        .collect();
    save_embeddings(&cache_path, embedder.total_dim(), &records).unwrap();
    let (dim, loaded) = load_embeddings(&cache_path).unwrap();
    assert_eq!(dim, embedder.total_dim());
    for ((id_a, vals_a), (id_b, vals_b)) in records.iter().zip(loaded.iter()) {
        assert_eq!(id_a, id_b);
        assert_eq!(vals_a, vals_b);
    }
}

#[test]
fn classify_review_handles_raw_crawled_text() {
    // Raw text with punctuation and casing goes through the same pipeline
    // the evaluation uses.
    let embedder = ConcatEmbedder::default_hash();
    let model = init_model(3);
    let sets = KeywordSets::defaults();
    let pipeline = Pipeline {
        embedder: &embedder,
        model: &model,
        keywords: &sets,
        hybrid: HybridConfig::default(),
        lexicon: None,
    };
    let prediction =
        classify_review("Cons: the Screen-Reader SKIPS the menu!!", &pipeline).unwrap();
    assert!(prediction.confidence >= 0.5);
    assert!(prediction.label <= 1);
}
