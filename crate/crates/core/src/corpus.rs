//! Review data model, dataset I/O, stratified splitting, and class-balance
//! reporting.
//!
//! Two on-disk formats share the same record schema
//! (`id,app_name,source,text,label`):
//! - `DELIMITED_TABLE`: UTF-8 CSV with a header row; fields containing
//!   commas are double-quoted, embedded quotes doubled.
//! - `LINE_RECORDS`: one JSON object per line.
//!
//! Labels are serialized as integer 0/1; an absent label is an empty CSV
//! field or JSON `null`.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed record at row {row}: {message}")]
    MalformedRecord { row: usize, message: String },
    #[error("label {value} at row {row} is outside {{0,1}}")]
    InvalidLabel { row: usize, value: i64 },
    #[error("duplicate review id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("review {id:?} has empty raw text")]
    EmptyRawText { id: String },
    #[error("cannot save an empty dataset")]
    EmptyDataset,
    #[error("review {id:?} is unlabeled; operation requires labels")]
    UnlabeledReview { id: String },
    #[error("test_count {test_count} out of range for dataset of {total}")]
    TestCountOutOfRange { test_count: usize, total: usize },
}

/// Where a review came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReviewSource {
    Crawled,
    Imported,
}

/// One user review record.
///
/// `raw_text` is the text as ingested; `text` is the normalized form and
/// equals `raw_text` until preprocessing runs. On disk only `text` is
/// stored, so a freshly loaded review always has `raw_text == text`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Review {
    pub id: String,
    pub source: ReviewSource,
    pub app_name: String,
    pub raw_text: String,
    pub text: String,
    /// 0 = no accessibility issue, 1 = accessibility issue.
    pub label: Option<u8>,
}

/// An ordered collection of reviews plus free-text provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub reviews: Vec<Review>,
    pub provenance: String,
}

/// Tally of labels in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub total: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Supported dataset file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DatasetFormat {
    /// CSV with header `id,app_name,source,text,label`.
    DelimitedTable,
    /// One JSON object per line with the same keys.
    LineRecords,
}

impl DatasetFormat {
    /// Guesses the format from a file extension; defaults to line records.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DatasetFormat::DelimitedTable,
            _ => DatasetFormat::LineRecords,
        }
    }
}

/// On-disk record shape shared by both formats.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewRecord {
    #[serde(default)]
    id: String,
    #[serde(default)]
    app_name: String,
    source: ReviewSource,
    text: String,
    label: Option<i64>,
}

impl ReviewRecord {
    fn into_review(self, row: usize, ids_seen: &mut HashSet<String>) -> Result<Review, CorpusError> {
        let label = match self.label {
            None => None,
            Some(v @ (0 | 1)) => Some(v as u8),
            Some(v) => return Err(CorpusError::InvalidLabel { row, value: v }),
        };
        // Ids are assigned from the data row index when absent.
        let id = if self.id.is_empty() {
            (row - 1).to_string()
        } else {
            self.id
        };
        if !ids_seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { id, row });
        }
        if self.text.is_empty() {
            return Err(CorpusError::EmptyRawText { id });
        }
        Ok(Review {
            id,
            source: self.source,
            app_name: self.app_name,
            raw_text: self.text.clone(),
            text: self.text,
            label,
        })
    }

    fn from_review(review: &Review) -> Self {
        Self {
            id: review.id.clone(),
            app_name: review.app_name.clone(),
            source: review.source,
            text: review.text.clone(),
            label: review.label.map(i64::from),
        }
    }
}

/// Loads a dataset from `path` in the declared format.
///
/// Row numbers in errors are 1-based data rows (the CSV header is row 0).
pub fn load_reviews(path: &Path, format: DatasetFormat) -> Result<LabeledDataset, CorpusError> {
    let content = std::fs::read_to_string(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let reviews = match format {
        DatasetFormat::DelimitedTable => parse_delimited(&content)?,
        DatasetFormat::LineRecords => parse_line_records(&content)?,
    };
    Ok(LabeledDataset {
        reviews,
        provenance: format!("loaded from {}", path.display()),
    })
}

fn parse_delimited(content: &str) -> Result<Vec<Review>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());
    let mut ids_seen = HashSet::new();
    let mut reviews = Vec::new();
    for (i, result) in reader.deserialize::<ReviewRecord>().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| map_csv_error(e, row))?;
        reviews.push(record.into_review(row, &mut ids_seen)?);
    }
    Ok(reviews)
}

fn map_csv_error(e: csv::Error, fallback_row: usize) -> CorpusError {
    // Prefer the parser's own line position when it has one.
    let row = e
        .position()
        .map(|p| p.record() as usize)
        .unwrap_or(fallback_row);
    if let csv::ErrorKind::Deserialize { err, .. } = e.kind() {
        let message = err.to_string();
        // Out-of-range integer labels surface as deserialize errors; keep
        // the dedicated label error for anything mentioning the field.
        if message.contains("label") {
            return CorpusError::MalformedRecord {
                row,
                message: format!("label: {message}"),
            };
        }
        return CorpusError::MalformedRecord { row, message };
    }
    CorpusError::MalformedRecord {
        row,
        message: e.to_string(),
    }
}

fn parse_line_records(content: &str) -> Result<Vec<Review>, CorpusError> {
    let mut ids_seen = HashSet::new();
    let mut reviews = Vec::new();
    let mut row = 0;
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let record: ReviewRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
                row,
                message: e.to_string(),
            })?;
        reviews.push(record.into_review(row, &mut ids_seen)?);
    }
    Ok(reviews)
}

/// Serializes a dataset into `writer` in the given format.
pub fn write_reviews(
    dataset: &LabeledDataset,
    writer: &mut impl Write,
    format: DatasetFormat,
) -> Result<(), CorpusError> {
    if dataset.reviews.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let io_err = |path: &str, source| CorpusError::Write {
        path: PathBuf::from(path),
        source,
    };
    match format {
        DatasetFormat::DelimitedTable => {
            let mut csv_writer = csv::Writer::from_writer(Vec::new());
            for review in &dataset.reviews {
                csv_writer
                    .serialize(ReviewRecord::from_review(review))
                    .map_err(|e| io_err("<writer>", std::io::Error::other(e)))?;
            }
            let bytes = csv_writer
                .into_inner()
                .map_err(|e| io_err("<writer>", std::io::Error::other(e)))?;
            writer
                .write_all(&bytes)
                .map_err(|e| io_err("<writer>", e))?;
        }
        DatasetFormat::LineRecords => {
            for review in &dataset.reviews {
                serde_json::to_writer(&mut *writer, &ReviewRecord::from_review(review))
                    .map_err(|e| io_err("<writer>", std::io::Error::other(e)))?;
                writer.write_all(b"\n").map_err(|e| io_err("<writer>", e))?;
            }
        }
    }
    Ok(())
}

/// Saves a dataset to `path`. Loading the result reproduces the dataset
/// record-for-record (with `raw_text` equal to the stored text).
pub fn save_reviews(
    dataset: &LabeledDataset,
    path: &Path,
    format: DatasetFormat,
) -> Result<(), CorpusError> {
    let mut buffer = Vec::new();
    write_reviews(dataset, &mut buffer, format)?;
    std::fs::write(path, buffer).map_err(|source| CorpusError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes arbitrary serializable records as LINE_RECORDS (one JSON object
/// per line).
pub fn write_line_records<T: Serialize>(
    records: &[T],
    writer: &mut impl Write,
) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Tallies labels, failing on the first unlabeled review or on an empty
/// dataset.
pub fn class_balance(dataset: &LabeledDataset) -> Result<ClassBalance, CorpusError> {
    if dataset.reviews.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut positives = 0;
    let mut negatives = 0;
    for review in &dataset.reviews {
        match review.label {
            Some(1) => positives += 1,
            Some(_) => negatives += 1,
            None => {
                return Err(CorpusError::UnlabeledReview {
                    id: review.id.clone(),
                })
            }
        }
    }
    Ok(ClassBalance {
        total: dataset.reviews.len(),
        positives,
        negatives,
    })
}

/// Splits a fully labeled dataset into disjoint train/validation and test
/// partitions with per-class test counts proportional to the class balance
/// (largest-remainder apportionment, so each class is within ±1 of its
/// ideal share). Deterministic for a fixed seed.
pub fn stratified_split(
    dataset: &LabeledDataset,
    test_count: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), CorpusError> {
    let total = dataset.reviews.len();
    if test_count == 0 || test_count >= total {
        return Err(CorpusError::TestCountOutOfRange { test_count, total });
    }
    let balance = class_balance(dataset)?;

    // Ideal per-class share of the test set; floor first, then hand the
    // remaining slots to the largest fractional parts.
    let classes = [(0u8, balance.negatives), (1u8, balance.positives)];
    let mut targets = [0usize; 2];
    let mut fractions = [0f64; 2];
    for (i, (_, count)) in classes.iter().enumerate() {
        let ideal = test_count as f64 * (*count as f64) / total as f64;
        targets[i] = ideal.floor() as usize;
        fractions[i] = ideal - ideal.floor();
    }
    let mut assigned: usize = targets.iter().sum();
    while assigned < test_count {
        let i = if fractions[0] >= fractions[1] { 0 } else { 1 };
        targets[i] += 1;
        fractions[i] = -1.0;
        assigned += 1;
    }
    // A class target can exceed the class size only if the other class ran
    // out; clamp and rebalance.
    for i in 0..2 {
        if targets[i] > classes[i].1 {
            let excess = targets[i] - classes[i].1;
            targets[i] = classes[i].1;
            targets[1 - i] += excess;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids = HashSet::new();
    for (i, (label, _)) in classes.iter().enumerate() {
        let mut members: Vec<&Review> = dataset
            .reviews
            .iter()
            .filter(|r| r.label == Some(*label))
            .collect();
        members.shuffle(&mut rng);
        for review in members.into_iter().take(targets[i]) {
            test_ids.insert(review.id.clone());
        }
    }

    // Both partitions keep the original dataset order.
    let (test, train_val): (Vec<Review>, Vec<Review>) = dataset
        .reviews
        .iter()
        .cloned()
        .partition(|r| test_ids.contains(&r.id));
    Ok((
        LabeledDataset {
            reviews: train_val,
            provenance: format!("{} [train/val]", dataset.provenance),
        },
        LabeledDataset {
            reviews: test,
            provenance: format!("{} [test]", dataset.provenance),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn make_review(id: &str, text: &str, label: Option<u8>) -> Review {
        Review {
            id: id.to_string(),
            source: ReviewSource::Imported,
            app_name: "demoapp".to_string(),
            raw_text: text.to_string(),
            text: text.to_string(),
            label,
        }
    }

    fn make_dataset(n_pos: usize, n_neg: usize) -> LabeledDataset {
        let mut reviews = Vec::new();
        for i in 0..n_pos {
            reviews.push(make_review(&format!("p{i}"), "positive review text", Some(1)));
        }
        for i in 0..n_neg {
            reviews.push(make_review(&format!("n{i}"), "negative review text", Some(0)));
        }
        LabeledDataset {
            reviews,
            provenance: "synthetic".to_string(),
        }
    }

    #[test]
    fn loads_three_record_csv_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.csv");
        std::fs::write(
            &path,
            "id,app_name,source,text,label\n\
             r1,appx,CRAWLED,\"navigation is broken, badly\",1\n\
             r2,appx,IMPORTED,works fine for me,0\n\
             r3,appy,CRAWLED,\"she said \"\"unusable\"\" twice\",1\n",
        )
        .unwrap();
        let ds = load_reviews(&path, DatasetFormat::DelimitedTable).unwrap();
        assert_eq!(ds.reviews.len(), 3);
        assert_eq!(ds.reviews[0].text, "navigation is broken, badly");
        assert_eq!(ds.reviews[2].text, "she said \"unusable\" twice");
        assert_eq!(ds.reviews[1].label, Some(0));
        assert_eq!(ds.reviews[0].source, ReviewSource::Crawled);
    }

    #[test]
    fn loads_line_records_with_null_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"app_name\":\"x\",\"source\":\"IMPORTED\",\"text\":\"hello world\",\"label\":null}\n\
             {\"id\":\"b\",\"app_name\":\"x\",\"source\":\"CRAWLED\",\"text\":\"second record\",\"label\":1}\n",
        )
        .unwrap();
        let ds = load_reviews(&path, DatasetFormat::LineRecords).unwrap();
        assert_eq!(ds.reviews.len(), 2);
        assert_eq!(ds.reviews[0].label, None);
        assert_eq!(ds.reviews[1].label, Some(1));
    }

    #[test]
    fn label_outside_zero_one_is_rejected_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.csv");
        std::fs::write(
            &path,
            "id,app_name,source,text,label\n\
             r1,appx,CRAWLED,fine text,0\n\
             r2,appx,CRAWLED,bad label here,2\n",
        )
        .unwrap();
        match load_reviews(&path, DatasetFormat::DelimitedTable) {
            Err(CorpusError::InvalidLabel { row, value }) => {
                assert_eq!(row, 2);
                assert_eq!(value, 2);
            }
            other => panic!("expected InvalidLabel, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"source\":\"IMPORTED\",\"text\":\"ok text\",\"label\":0}\nnot json\n").unwrap();
        match load_reviews(&path, DatasetFormat::LineRecords) {
            Err(CorpusError::MalformedRecord { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn missing_ids_are_assigned_from_row_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.csv");
        std::fs::write(
            &path,
            "id,app_name,source,text,label\n\
             ,appx,CRAWLED,first text,0\n\
             ,appx,CRAWLED,second text,1\n",
        )
        .unwrap();
        let ds = load_reviews(&path, DatasetFormat::DelimitedTable).unwrap();
        assert_eq!(ds.reviews[0].id, "0");
        assert_eq!(ds.reviews[1].id, "1");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"source\":\"IMPORTED\",\"text\":\"one\",\"label\":0}\n\
             {\"id\":\"a\",\"source\":\"IMPORTED\",\"text\":\"two\",\"label\":1}\n",
        )
        .unwrap();
        assert!(matches!(
            load_reviews(&path, DatasetFormat::LineRecords),
            Err(CorpusError::DuplicateId { .. })
        ));
    }

    #[test]
    fn save_then_load_round_trips_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let ds = LabeledDataset {
            reviews: vec![
                make_review("a", "commas, \"quotes\" and text", Some(1)),
                make_review("b", "plain text here", Some(0)),
                make_review("c", "unlabeled entry", None),
            ],
            provenance: "fixture".to_string(),
        };
        for (format, name) in [
            (DatasetFormat::DelimitedTable, "ds.csv"),
            (DatasetFormat::LineRecords, "ds.jsonl"),
        ] {
            let path = dir.path().join(name);
            save_reviews(&ds, &path, format).unwrap();
            let loaded = load_reviews(&path, format).unwrap();
            assert_eq!(loaded.reviews, ds.reviews, "round trip failed for {name}");
        }
        let csv_text = std::fs::read_to_string(dir.path().join("ds.csv")).unwrap();
        assert_eq!(
            csv_text.lines().next().unwrap(),
            "id,app_name,source,text,label"
        );
    }

    #[test]
    fn save_empty_dataset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = LabeledDataset {
            reviews: Vec::new(),
            provenance: String::new(),
        };
        assert!(matches!(
            save_reviews(&ds, &dir.path().join("x.csv"), DatasetFormat::DelimitedTable),
            Err(CorpusError::EmptyDataset)
        ));
    }

    #[test]
    fn class_balance_counts_exactly() {
        let ds = make_dataset(347, 369);
        let balance = class_balance(&ds).unwrap();
        assert_eq!(
            balance,
            ClassBalance {
                total: 716,
                positives: 347,
                negatives: 369
            }
        );
    }

    #[test]
    fn full_size_dataset_keeps_balance_through_save_and_load() {
        // Same shape as the released corpus: 4,762 reviews, 2,513 positive.
        let ds = make_dataset(2513, 2249);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.jsonl");
        save_reviews(&ds, &path, DatasetFormat::LineRecords).unwrap();
        let loaded = load_reviews(&path, DatasetFormat::LineRecords).unwrap();
        let balance = class_balance(&loaded).unwrap();
        assert_eq!(
            balance,
            ClassBalance {
                total: 4762,
                positives: 2513,
                negatives: 2249
            }
        );
    }

    #[test]
    fn class_balance_single_positive() {
        let ds = make_dataset(1, 0);
        assert_eq!(
            class_balance(&ds).unwrap(),
            ClassBalance {
                total: 1,
                positives: 1,
                negatives: 0
            }
        );
    }

    #[test]
    fn class_balance_rejects_unlabeled() {
        let mut ds = make_dataset(1, 1);
        ds.reviews[0].label = None;
        assert!(matches!(
            class_balance(&ds),
            Err(CorpusError::UnlabeledReview { .. })
        ));
    }

    #[test]
    fn class_balance_rejects_empty() {
        let ds = LabeledDataset {
            reviews: Vec::new(),
            provenance: String::new(),
        };
        assert!(matches!(class_balance(&ds), Err(CorpusError::EmptyDataset)));
    }

    #[test]
    fn split_matches_reported_dataset_counts() {
        let ds = make_dataset(2513, 2249);
        let (train_val, test) = stratified_split(&ds, 716, 7).unwrap();
        assert_eq!(train_val.reviews.len(), 4046);
        assert_eq!(test.reviews.len(), 716);
    }

    #[test]
    fn split_five_five_with_two_test_is_one_and_one() {
        // Enumerating stratified draws: ideal share is exactly 1.0 per
        // class, so proportionality forces one of each for every seed.
        let ds = make_dataset(5, 5);
        for seed in 0..20 {
            let (_, test) = stratified_split(&ds, 2, seed).unwrap();
            let balance = class_balance(&test).unwrap();
            assert_eq!((balance.positives, balance.negatives), (1, 1), "seed {seed}");
        }
    }

    #[test]
    fn split_rejects_test_count_zero_and_total() {
        let ds = make_dataset(5, 5);
        assert!(matches!(
            stratified_split(&ds, 0, 1),
            Err(CorpusError::TestCountOutOfRange { .. })
        ));
        assert!(matches!(
            stratified_split(&ds, 10, 1),
            Err(CorpusError::TestCountOutOfRange { .. })
        ));
    }

    #[test]
    fn split_rejects_unlabeled_reviews() {
        let mut ds = make_dataset(5, 5);
        ds.reviews[3].label = None;
        assert!(matches!(
            stratified_split(&ds, 2, 1),
            Err(CorpusError::UnlabeledReview { .. })
        ));
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let ds = make_dataset(30, 20);
        let (a_train, a_test) = stratified_split(&ds, 10, 42).unwrap();
        let (b_train, b_test) = stratified_split(&ds, 10, 42).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let (_, c_test) = stratified_split(&ds, 10, 43).unwrap();
        assert_ne!(a_test, c_test, "different seeds should move membership");
    }

    proptest! {
        #[test]
        fn split_partitions_and_stratifies(
            n_pos in 1usize..60,
            n_neg in 1usize..60,
            seed in 0u64..1000,
        ) {
            let ds = make_dataset(n_pos, n_neg);
            let total = n_pos + n_neg;
            let test_count = 1 + seed as usize % (total - 1);
            let (train, test) = stratified_split(&ds, test_count, seed).unwrap();

            // Disjoint and exhaustive by id.
            let train_ids: HashSet<_> = train.reviews.iter().map(|r| r.id.clone()).collect();
            let test_ids: HashSet<_> = test.reviews.iter().map(|r| r.id.clone()).collect();
            prop_assert_eq!(train_ids.len() + test_ids.len(), total);
            prop_assert!(train_ids.is_disjoint(&test_ids));
            prop_assert_eq!(test.reviews.len(), test_count);

            // Per-class proportionality within ±1 of the rounded ideal.
            let test_pos = test.reviews.iter().filter(|r| r.label == Some(1)).count();
            let ideal = test_count as f64 * n_pos as f64 / total as f64;
            prop_assert!((test_pos as f64 - ideal.round()).abs() <= 1.0);
        }
    }
}
