//! Sparse bag-of-n-gram features over concept-normal-form documents.
//!
//! A [`FeatureSpace`] is fitted once on a training corpus: every distinct
//! unigram (and, optionally, bigram) of symbols gets a column, numbered
//! in first-seen order. Transforming a document counts its n-grams,
//! ignoring any that were never seen at fit time, so train and test
//! vectors always share the same dimensionality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cnf::CnfDocument;
use crate::numeric::stable_fingerprint;

/// Which n-gram orders become features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Unigrams only.
    Unigram,
    /// Unigrams and bigrams.
    UniBigram,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Unigram => write!(f, "unigram"),
            FeatureKind::UniBigram => write!(f, "unibigram"),
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unigram" => Ok(FeatureKind::Unigram),
            "unibigram" => Ok(FeatureKind::UniBigram),
            other => Err(format!(
                "unknown feature kind {other:?}; expected unigram or unibigram"
            )),
        }
    }
}

/// A sparse count vector in a fixed-dimensional space.
///
/// Entries are sorted by column index and hold no zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Build from unordered (index, count) pairs, merging repeats.
    pub fn from_counts(dim: usize, counts: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (index, count) in counts {
            assert!(index < dim, "index {index} out of range for dim {dim}");
            *merged.entry(index).or_insert(0.0) += count;
        }
        merged.retain(|_, v| *v != 0.0);
        SparseVector {
            dim,
            entries: merged.into_iter().collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Sum of all stored counts.
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }
}

/// Fitted mapping from n-grams to column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    kind: FeatureKind,
    /// Feature names in column order.
    names: Vec<String>,
    /// Inverse of `names`.
    index: BTreeMap<String, usize>,
}

/// The n-grams of a symbol sequence, in reading order: all unigrams,
/// then (for [`FeatureKind::UniBigram`]) all adjacent pairs joined by a
/// single space.
pub fn ngrams(symbols: &[String], kind: FeatureKind) -> Vec<String> {
    let mut grams: Vec<String> = symbols.to_vec();
    if kind == FeatureKind::UniBigram {
        for pair in symbols.windows(2) {
            grams.push(format!("{} {}", pair[0], pair[1]));
        }
    }
    grams
}

impl FeatureSpace {
    /// Assign a column to every distinct n-gram of the corpus, in
    /// first-seen order.
    pub fn fit(docs: &[CnfDocument], kind: FeatureKind) -> Self {
        let mut names = Vec::new();
        let mut index = BTreeMap::new();
        for doc in docs {
            for gram in ngrams(&doc.symbols, kind) {
                if !index.contains_key(&gram) {
                    index.insert(gram.clone(), names.len());
                    names.push(gram);
                }
            }
        }
        FeatureSpace { kind, names, index }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Number of columns.
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Feature names in column order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    /// Count the document's n-grams; unseen grams are dropped.
    pub fn transform(&self, doc: &CnfDocument) -> SparseVector {
        let counts = ngrams(&doc.symbols, self.kind)
            .into_iter()
            .filter_map(|gram| self.index.get(&gram).map(|&i| (i, 1.0)));
        SparseVector::from_counts(self.dim(), counts)
    }

    /// Transform a whole corpus.
    pub fn transform_all(&self, docs: &[CnfDocument]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    /// Stable identity of this space, for checking that a model and a
    /// feature space were trained together.
    pub fn fingerprint(&self) -> u64 {
        let kind = self.kind.to_string();
        let parts = std::iter::once(kind.as_str())
            .chain(self.names.iter().map(String::as_str));
        stable_fingerprint(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, symbols: &[&str]) -> CnfDocument {
        CnfDocument {
            source_id: id.to_string(),
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
            label: None,
            dataset: None,
        }
    }

    #[test]
    fn unigram_fit_uses_first_seen_order() {
        let docs = vec![doc("a", &["B", "A", "B"]), doc("b", &["C", "A"])];
        let space = FeatureSpace::fit(&docs, FeatureKind::Unigram);
        assert_eq!(space.dim(), 3);
        assert_eq!(space.names(), &["B", "A", "C"]);
        assert_eq!(space.column("B"), Some(0));
        assert_eq!(space.column("C"), Some(2));
        assert_eq!(space.column("D"), None);
    }

    #[test]
    fn transform_counts_occurrences() {
        let docs = vec![doc("a", &["B", "A", "B"])];
        let space = FeatureSpace::fit(&docs, FeatureKind::Unigram);
        let vec = space.transform(&doc("x", &["B", "B", "A", "B"]));
        assert_eq!(vec.dim, 2);
        assert_eq!(vec.entries, vec![(0, 3.0), (1, 1.0)]);
        assert_eq!(vec.total(), 4.0);
    }

    #[test]
    fn bigram_features_join_adjacent_symbols() {
        let docs = vec![doc("a", &["A", "B", "C"])];
        let space = FeatureSpace::fit(&docs, FeatureKind::UniBigram);
        assert_eq!(space.names(), &["A", "B", "C", "A B", "B C"]);
        let vec = space.transform(&doc("x", &["A", "B", "C"]));
        assert_eq!(vec.nnz(), 5);
        let vec = space.transform(&doc("y", &["C", "A", "B"]));
        // Unigrams C, A, B and bigram "A B" hit; "C A" was never seen.
        assert_eq!(vec.nnz(), 4);
    }

    #[test]
    fn unseen_grams_are_ignored_and_dim_is_preserved() {
        let docs = vec![doc("a", &["A"])];
        let space = FeatureSpace::fit(&docs, FeatureKind::Unigram);
        let vec = space.transform(&doc("x", &["Z", "Q"]));
        assert_eq!(vec.dim, 1);
        assert!(vec.entries.is_empty());
    }

    #[test]
    fn empty_corpus_and_empty_documents() {
        let space = FeatureSpace::fit(&[], FeatureKind::UniBigram);
        assert_eq!(space.dim(), 0);
        let vec = space.transform(&doc("x", &["A"]));
        assert_eq!(vec.dim, 0);
        assert!(vec.entries.is_empty());

        let space = FeatureSpace::fit(&[doc("a", &["A"])], FeatureKind::UniBigram);
        let vec = space.transform(&doc("x", &[]));
        assert!(vec.entries.is_empty());
    }

    #[test]
    fn single_symbol_document_has_no_bigrams() {
        assert_eq!(
            ngrams(&["A".to_string()], FeatureKind::UniBigram),
            vec!["A".to_string()]
        );
    }

    #[test]
    fn from_counts_merges_and_drops_zeros() {
        let vec = SparseVector::from_counts(5, vec![(3, 1.0), (1, 2.0), (3, 1.0), (0, 0.0)]);
        assert_eq!(vec.entries, vec![(1, 2.0), (3, 2.0)]);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let docs = vec![doc("a", &["A", "B"]), doc("b", &["B", "C"])];
        let space = FeatureSpace::fit(&docs, FeatureKind::UniBigram);
        let json = serde_json::to_string(&space).unwrap();
        let back: FeatureSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(space, back);
        assert_eq!(space.fingerprint(), back.fingerprint());
    }

    #[test]
    fn fingerprint_distinguishes_kind_and_vocabulary() {
        let docs = vec![doc("a", &["A", "B"])];
        let uni = FeatureSpace::fit(&docs, FeatureKind::Unigram);
        let bi = FeatureSpace::fit(&docs, FeatureKind::UniBigram);
        assert_ne!(uni.fingerprint(), bi.fingerprint());
        let other = FeatureSpace::fit(&[doc("a", &["B", "A"])], FeatureKind::Unigram);
        assert_ne!(uni.fingerprint(), other.fingerprint());
    }

    proptest! {
        #[test]
        fn transform_total_counts_known_grams(
            fit_syms in proptest::collection::vec("[A-C]", 0..8),
            query_syms in proptest::collection::vec("[A-E]", 0..8),
        ) {
            let fit_doc = CnfDocument {
                source_id: "f".into(),
                symbols: fit_syms,
                label: None,
                dataset: None,
            };
            let query_doc = CnfDocument {
                source_id: "q".into(),
                symbols: query_syms.clone(),
                label: None,
                dataset: None,
            };
            for kind in [FeatureKind::Unigram, FeatureKind::UniBigram] {
                let space = FeatureSpace::fit(std::slice::from_ref(&fit_doc), kind);
                let vec = space.transform(&query_doc);
                let known = ngrams(&query_doc.symbols, kind)
                    .into_iter()
                    .filter(|g| space.column(g).is_some())
                    .count();
                prop_assert_eq!(vec.total(), known as f64);
                // Entries sorted strictly by index.
                for pair in vec.entries.windows(2) {
                    prop_assert!(pair[0].0 < pair[1].0);
                }
            }
        }
    }
}
