//! Labeled short-message corpora: JSONL reading and writing, duplicate
//! removal, and seeded train/test splits.
//!
//! # Record format
//!
//! One JSON object per line with exactly these fields:
//!
//! ```json
//! {"id": "t1", "text": "got the flu", "label": 1, "dataset": "influenza"}
//! ```
//!
//! * `id` — required, unique string.
//! * `text` — required, non-empty string.
//! * `label` — optional, the integer `0` or `1`.
//! * `dataset` — optional string tag.
//!
//! Unknown fields are rejected so that typos (`lable`) fail loudly.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::normalize_tokenize;

/// One labeled (or unlabeled) short message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

/// A named collection of records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<Record>,
}

/// Aggregate counts over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub records: usize,
    pub labeled: usize,
    pub positives: usize,
    /// Positive share of the labeled records; `None` when nothing is labeled.
    pub positive_fraction: Option<f64>,
}

/// Why a record was dropped by [`dedup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Retweet,
    Duplicate,
}

impl std::fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RemovalReason::Retweet => write!(f, "retweet"),
            RemovalReason::Duplicate => write!(f, "duplicate"),
        }
    }
}

/// One line of the dedup removal log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalEntry {
    pub id: String,
    pub reason: RemovalReason,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: missing or empty text")]
    MissingText { line: usize },
    #[error("line {line}: label must be the integer 0 or 1")]
    BadLabel { line: usize },
    #[error("split fraction must lie strictly between 0 and 1, got {fraction}")]
    BadFraction { fraction: String },
    #[error("stratified split requires a label on every record; {id:?} has none")]
    UnlabeledData { id: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<Record>) -> Self {
        Dataset { name: name.into(), records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let labeled = self.records.iter().filter(|r| r.label.is_some()).count();
        let positives = self
            .records
            .iter()
            .filter(|r| r.label == Some(1))
            .count();
        DatasetStats {
            records: self.records.len(),
            labeled,
            positives,
            positive_fraction: if labeled == 0 {
                None
            } else {
                Some(positives as f64 / labeled as f64)
            },
        }
    }

    /// Labels of all records; errors if any record is unlabeled.
    pub fn labels(&self) -> Result<Vec<u8>, CorpusError> {
        self.records
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| CorpusError::UnlabeledData {
                    id: r.id.clone(),
                })
            })
            .collect()
    }
}

/// Read a corpus from JSONL.
pub fn read_corpus(reader: impl BufRead, name: &str) -> Result<Dataset, CorpusError> {
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::ParseError {
            line: line_no,
            message: "expected a JSON object".to_string(),
        })?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "id" | "text" | "label" | "dataset") {
                return Err(CorpusError::ParseError {
                    line: line_no,
                    message: format!("unknown field {key:?}"),
                });
            }
        }
        let id = match obj.get("id") {
            Some(serde_json::Value::String(s)) if !s.is_empty() => s.clone(),
            _ => {
                return Err(CorpusError::ParseError {
                    line: line_no,
                    message: "missing or invalid id".to_string(),
                })
            }
        };
        if !seen_ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id });
        }
        let text = match obj.get("text") {
            Some(serde_json::Value::String(s)) if !s.is_empty() => s.clone(),
            Some(serde_json::Value::String(_)) | None => {
                return Err(CorpusError::MissingText { line: line_no })
            }
            Some(_) => {
                return Err(CorpusError::ParseError {
                    line: line_no,
                    message: "text must be a string".to_string(),
                })
            }
        };
        let label = match obj.get("label") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::Number(n)) => match n.as_i64() {
                Some(0) => Some(0u8),
                Some(1) => Some(1u8),
                _ => return Err(CorpusError::BadLabel { line: line_no }),
            },
            Some(_) => return Err(CorpusError::BadLabel { line: line_no }),
        };
        let dataset = match obj.get("dataset") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(CorpusError::ParseError {
                    line: line_no,
                    message: "dataset must be a string".to_string(),
                })
            }
        };
        records.push(Record { id, text, label, dataset });
    }
    Ok(Dataset::new(name, records))
}

/// Write a corpus as JSONL with a stable field order.
pub fn write_corpus(dataset: &Dataset, mut writer: impl Write) -> Result<(), CorpusError> {
    for record in &dataset.records {
        let line = serde_json::to_string(record).map_err(|e| CorpusError::Io(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| CorpusError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Remove retweets and duplicate messages.
///
/// A record whose normalized token list contains `rt` is dropped as a
/// retweet. Among the remainder, records with an exactly repeated
/// normalized token sequence are dropped, keeping the first occurrence.
/// Returns the surviving dataset and a log of removals in input order.
pub fn dedup(dataset: &Dataset) -> (Dataset, Vec<RemovalEntry>) {
    let mut kept = Vec::new();
    let mut log = Vec::new();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    for record in &dataset.records {
        let tokens: Vec<String> = normalize_tokenize(&record.text)
            .into_iter()
            .map(|t| t.surface)
            .collect();
        if tokens.iter().any(|t| t == "rt") {
            log.push(RemovalEntry {
                id: record.id.clone(),
                reason: RemovalReason::Retweet,
            });
            continue;
        }
        if !seen.insert(tokens) {
            log.push(RemovalEntry {
                id: record.id.clone(),
                reason: RemovalReason::Duplicate,
            });
            continue;
        }
        kept.push(record.clone());
    }
    (Dataset::new(dataset.name.clone(), kept), log)
}

/// Split a dataset into train and test parts.
///
/// `train_fraction` must lie strictly between 0 and 1. Selection is a
/// seeded shuffle; records keep their original relative order within each
/// part. A stratified split requires labels everywhere and preserves the
/// positive fraction to within one record per class.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction {
            fraction: format!("{train_fraction}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dataset.records.len();
    let mut train_idx: HashSet<usize> = HashSet::new();

    if stratified {
        let mut by_class: HashMap<u8, Vec<usize>> = HashMap::new();
        for (i, record) in dataset.records.iter().enumerate() {
            let label = record.label.ok_or_else(|| CorpusError::UnlabeledData {
                id: record.id.clone(),
            })?;
            by_class.entry(label).or_default().push(i);
        }
        // Fixed class order keeps the RNG stream deterministic.
        let mut classes: Vec<u8> = by_class.keys().copied().collect();
        classes.sort_unstable();
        for class in classes {
            let mut indices = by_class.remove(&class).expect("class present");
            indices.shuffle(&mut rng);
            let take = (train_fraction * indices.len() as f64).round() as usize;
            let take = take.min(indices.len());
            train_idx.extend(indices.into_iter().take(take));
        }
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let take = (train_fraction * n as f64).round() as usize;
        let take = take.min(n);
        train_idx.extend(indices.into_iter().take(take));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, record) in dataset.records.iter().enumerate() {
        if train_idx.contains(&i) {
            train.push(record.clone());
        } else {
            test.push(record.clone());
        }
    }
    Ok((
        Dataset::new(format!("{}-train", dataset.name), train),
        Dataset::new(format!("{}-test", dataset.name), test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, text: &str, label: Option<u8>) -> Record {
        Record {
            id: id.to_string(),
            text: text.to_string(),
            label,
            dataset: None,
        }
    }

    #[test]
    fn reads_three_valid_records() {
        let jsonl = r#"{"id": "a", "text": "got the flu", "label": 1}
{"id": "b", "text": "flu shots available", "label": 0, "dataset": "influenza"}
{"id": "c", "text": "no label here"}
"#;
        let ds = read_corpus(jsonl.as_bytes(), "demo").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[0].label, Some(1));
        assert_eq!(ds.records[1].dataset.as_deref(), Some("influenza"));
        assert_eq!(ds.records[2].label, None);
        let stats = ds.stats();
        assert_eq!(stats.records, 3);
        assert_eq!(stats.labeled, 2);
        assert_eq!(stats.positives, 1);
        assert_eq!(stats.positive_fraction, Some(0.5));
    }

    #[test]
    fn rejects_missing_text() {
        let err = read_corpus(br#"{"id": "a", "label": 1}"# as &[u8], "x").unwrap_err();
        assert_eq!(err, CorpusError::MissingText { line: 1 });
        let err = read_corpus(br#"{"id": "a", "text": ""}"# as &[u8], "x").unwrap_err();
        assert_eq!(err, CorpusError::MissingText { line: 1 });
    }

    #[test]
    fn rejects_bad_labels() {
        for bad in [
            r#"{"id": "a", "text": "t", "label": 2}"#,
            r#"{"id": "a", "text": "t", "label": -1}"#,
            r#"{"id": "a", "text": "t", "label": "1"}"#,
            r#"{"id": "a", "text": "t", "label": true}"#,
            r#"{"id": "a", "text": "t", "label": 0.5}"#,
        ] {
            let err = read_corpus(bad.as_bytes(), "x").unwrap_err();
            assert_eq!(err, CorpusError::BadLabel { line: 1 }, "input: {bad}");
        }
    }

    #[test]
    fn rejects_duplicate_ids_and_unknown_fields() {
        let jsonl = "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"a\", \"text\": \"y\"}\n";
        let err = read_corpus(jsonl.as_bytes(), "x").unwrap_err();
        assert_eq!(err, CorpusError::DuplicateId { line: 2, id: "a".into() });

        let err = read_corpus(br#"{"id": "a", "text": "x", "lable": 1}"# as &[u8], "x").unwrap_err();
        assert!(matches!(err, CorpusError::ParseError { line: 1, .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let jsonl = "{\"id\": \"a\", \"text\": \"x\"}\nnot json\n";
        let err = read_corpus(jsonl.as_bytes(), "x").unwrap_err();
        assert!(matches!(err, CorpusError::ParseError { line: 2, .. }));
    }

    #[test]
    fn round_trips_through_write_and_read() {
        let ds = Dataset::new(
            "demo",
            vec![
                rec("a", "got the flu", Some(1)),
                Record {
                    id: "b".into(),
                    text: "hello".into(),
                    label: None,
                    dataset: Some("other".into()),
                },
            ],
        );
        let mut buf = Vec::new();
        write_corpus(&ds, &mut buf).unwrap();
        let back = read_corpus(buf.as_slice(), "demo").unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn dedup_drops_retweets_then_duplicates() {
        let ds = Dataset::new(
            "demo",
            vec![
                rec("a", "RT @x: flu is bad", Some(1)),
                rec("b", "Flu is BAD!", Some(1)),
                rec("c", "flu is bad", Some(0)),
                rec("d", "something else", None),
            ],
        );
        let (kept, log) = dedup(&ds);
        assert_eq!(
            kept.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
            vec!["b", "d"]
        );
        assert_eq!(
            log,
            vec![
                RemovalEntry { id: "a".into(), reason: RemovalReason::Retweet },
                RemovalEntry { id: "c".into(), reason: RemovalReason::Duplicate },
            ]
        );
    }

    #[test]
    fn dedup_keeps_unique_records_and_is_idempotent() {
        let ds = Dataset::new(
            "demo",
            vec![
                rec("a", "one thing", Some(0)),
                rec("b", "another thing", Some(1)),
            ],
        );
        let (kept, log) = dedup(&ds);
        assert_eq!(kept.records, ds.records);
        assert!(log.is_empty());

        let noisy = Dataset::new(
            "demo",
            vec![
                rec("a", "same text", None),
                rec("b", "same text!", None),
                rec("c", "rt bad", None),
            ],
        );
        let (once, _) = dedup(&noisy);
        let (twice, log2) = dedup(&once);
        assert_eq!(once, twice);
        assert!(log2.is_empty());
    }

    #[test]
    fn embedded_rt_only_counts_as_whole_token() {
        let ds = Dataset::new(
            "demo",
            vec![rec("a", "start of something", None), rec("b", "rt hello", None)],
        );
        let (kept, log) = dedup(&ds);
        assert_eq!(kept.len(), 1, "token 'start' contains rt but is not rt");
        assert_eq!(log[0].id, "b");
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let records: Vec<Record> = (0..100)
            .map(|i| rec(&format!("r{i}"), &format!("text {i}"), Some(u8::from(i < 60))))
            .collect();
        let ds = Dataset::new("demo", records);

        let (train, test) = split(&ds, 0.8, 9, false).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);

        let (train2, test2) = split(&ds, 0.8, 9, false).unwrap();
        assert_eq!(train.records, train2.records);
        assert_eq!(test.records, test2.records);

        let (train3, _) = split(&ds, 0.8, 10, false).unwrap();
        assert_ne!(train.records, train3.records, "different seed, different split");
    }

    #[test]
    fn stratified_split_preserves_class_balance() {
        let records: Vec<Record> = (0..100)
            .map(|i| rec(&format!("r{i}"), &format!("text {i}"), Some(u8::from(i < 60))))
            .collect();
        let ds = Dataset::new("demo", records);
        let (train, test) = split(&ds, 0.8, 3, true).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        let train_pos = train.records.iter().filter(|r| r.label == Some(1)).count();
        let test_pos = test.records.iter().filter(|r| r.label == Some(1)).count();
        assert_eq!(train_pos, 48);
        assert_eq!(test_pos, 12);
    }

    #[test]
    fn split_rejects_degenerate_fractions_and_unlabeled_stratification() {
        let ds = Dataset::new("demo", vec![rec("a", "x", None), rec("b", "y", Some(1))]);
        for bad in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(
                split(&ds, bad, 0, false).unwrap_err(),
                CorpusError::BadFraction { .. }
            ));
        }
        assert_eq!(
            split(&ds, 0.5, 0, true).unwrap_err(),
            CorpusError::UnlabeledData { id: "a".into() }
        );
    }

    proptest! {
        #[test]
        fn split_partitions_the_dataset(
            n in 2usize..60,
            frac in 0.05f64..0.95,
            seed in 0u64..1000,
            stratified in proptest::bool::ANY,
        ) {
            let records: Vec<Record> = (0..n)
                .map(|i| rec(&format!("r{i}"), &format!("text {i}"), Some(u8::from(i % 3 == 0))))
                .collect();
            let ds = Dataset::new("demo", records.clone());
            let (train, test) = split(&ds, frac, seed, stratified).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            let mut ids: Vec<&str> = train
                .records
                .iter()
                .chain(&test.records)
                .map(|r| r.id.as_str())
                .collect();
            ids.sort_unstable();
            let mut expected: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
            expected.sort();
            let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();
            prop_assert_eq!(ids, expected_refs);
        }

        #[test]
        fn dedup_is_idempotent_on_random_corpora(
            texts in proptest::collection::vec("[a-c ]{0,12}", 0..25)
        ) {
            let records: Vec<Record> = texts
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.trim().is_empty())
                .map(|(i, t)| rec(&format!("r{i}"), t, None))
                .collect();
            let ds = Dataset::new("demo", records);
            let (once, _) = dedup(&ds);
            let (twice, log) = dedup(&once);
            prop_assert_eq!(once, twice);
            prop_assert!(log.is_empty());
        }
    }
}
