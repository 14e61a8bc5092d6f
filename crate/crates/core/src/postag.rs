//! Part-of-speech tagging for normalized short-message tokens.
//!
//! The tag set is the canonical 45-tag Penn Treebank inventory (36 word
//! classes plus 9 punctuation tags) extended with four microblog tags:
//! `RT` (retweet marker), `USR` (user mention), `HT` (hashtag) and `URL`.
//! The microblog tags are assigned by surface rules that always take
//! precedence over the statistical model:
//!
//! * the exact token `rt` is `RT`,
//! * a token starting with `@` is `USR`,
//! * a token starting with `#` is `HT`,
//! * a token starting with `http` is `URL`.
//!
//! Everything else goes through a greedy left-to-right averaged perceptron
//! with surface, affix, digit/hyphen, previous-tag and neighboring-word
//! features. Training shuffles sentences each epoch with a seeded RNG and
//! is bit-deterministic: the same corpus, epochs and seed always produce
//! the same model.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::Token;

/// Microblog tags, in canonical order.
pub const SPECIAL_TAGS: [&str; 4] = ["RT", "USR", "HT", "URL"];

/// The 45 Penn Treebank tags in canonical order: 36 word classes followed
/// by the 9 punctuation tags.
pub const PTB_TAGS: [&str; 45] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "$", "#", "``", "''", "(",
    ")", ",", ".", ":",
];

const START_TAG: &str = "<s>";
const BOUNDARY_WORD_LEFT: &str = "<s>";
const BOUNDARY_WORD_RIGHT: &str = "</s>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TagError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("sentence {sentence}: unknown tag {tag:?}")]
    UnknownTag { sentence: usize, tag: String },
    #[error("sentence {sentence}: {tokens} tokens but {tags} tags")]
    LengthMismatch {
        sentence: usize,
        tokens: usize,
        tags: usize,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("tag set is invalid: {0}")]
    BadTagSet(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("model serialization error: {0}")]
    Serde(String),
}

/// An ordered tag inventory: a base (Penn Treebank) list plus special tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    ptb: Vec<String>,
    special: Vec<String>,
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet {
            ptb: PTB_TAGS.iter().map(|s| s.to_string()).collect(),
            special: SPECIAL_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TagSet {
    /// Build a custom tag set; tags must be unique and the parts disjoint.
    pub fn new(ptb: Vec<String>, special: Vec<String>) -> Result<Self, TagError> {
        let set = TagSet { ptb, special };
        let mut seen = std::collections::HashSet::new();
        for tag in set.all() {
            if tag.is_empty() {
                return Err(TagError::BadTagSet("empty tag".to_string()));
            }
            if !seen.insert(tag) {
                return Err(TagError::BadTagSet(format!("tag {tag:?} repeated")));
            }
        }
        Ok(set)
    }

    /// A tag set with no tags at all.
    pub fn empty() -> Self {
        TagSet {
            ptb: Vec::new(),
            special: Vec::new(),
        }
    }

    /// All tags in canonical order: base list first, then special tags.
    pub fn all(&self) -> impl Iterator<Item = &str> {
        self.ptb.iter().chain(self.special.iter()).map(String::as_str)
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.all().any(|t| t == tag)
    }

    pub fn len(&self) -> usize {
        self.ptb.len() + self.special.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ptb(&self) -> &[String] {
        &self.ptb
    }

    pub fn special(&self) -> &[String] {
        &self.special
    }
}

/// Rule-based tag for microblog surface forms, if one applies.
///
/// Precedence: exact `rt`, then `@`, `#`, `http` prefixes. Expects a
/// normalized (lowercased) surface.
pub fn special_tag(surface: &str) -> Option<&'static str> {
    if surface == "rt" {
        Some("RT")
    } else if surface.starts_with('@') {
        Some("USR")
    } else if surface.starts_with('#') {
        Some("HT")
    } else if surface.starts_with("http") {
        Some("URL")
    } else {
        None
    }
}

/// One training sentence: parallel token and gold-tag sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

/// A trained averaged-perceptron tagging model.
///
/// Weights and priors live in ordered maps so that serialization, scoring
/// and averaging are all independent of hash-map iteration order; the model
/// round-trips through JSON bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub version: u32,
    feature_weights: BTreeMap<String, BTreeMap<String, f64>>,
    tag_priors: BTreeMap<String, u64>,
}

pub const TAGGER_MODEL_VERSION: u32 = 1;

/// Candidate tags in deterministic preference order (descending prior
/// frequency, then name); score ties resolve to the earlier candidate.
fn candidate_order(priors: &BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut c: Vec<(String, u64)> = priors.iter().map(|(t, &n)| (t.clone(), n)).collect();
    c.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    c
}

fn predict_tag(
    weights: &BTreeMap<String, BTreeMap<String, f64>>,
    features: &[String],
    candidates: &[(String, u64)],
    index: &HashMap<String, usize>,
) -> String {
    let mut scores = vec![0.0f64; candidates.len()];
    for feature in features {
        if let Some(per_tag) = weights.get(feature) {
            for (tag, w) in per_tag {
                if let Some(&i) = index.get(tag) {
                    scores[i] += w;
                }
            }
        }
    }
    let mut best = 0usize;
    for i in 1..candidates.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    candidates
        .get(best)
        .map(|(t, _)| t.clone())
        .unwrap_or_else(|| "NN".to_string())
}

fn candidate_index(candidates: &[(String, u64)]) -> HashMap<String, usize> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.clone(), i))
        .collect()
}

impl TaggerModel {

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("tagger model serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, TagError> {
        serde_json::from_str(json).map_err(|e| TagError::Serde(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TagError> {
        std::fs::write(path, self.to_json_string()).map_err(|e| TagError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TagError> {
        let text = std::fs::read_to_string(path).map_err(|e| TagError::Io(e.to_string()))?;
        Self::from_json_str(&text)
    }

    /// The tagging model bundled with the crate, trained on the built-in
    /// hand-tagged fixture corpus.
    pub fn default_model() -> &'static TaggerModel {
        static DEFAULT: OnceLock<TaggerModel> = OnceLock::new();
        DEFAULT.get_or_init(|| {
            let corpus = parse_tagged_corpus(DEFAULT_FIXTURE_TEXT)
                .expect("bundled fixture corpus is valid");
            train_tagger(&corpus, 8, 1).expect("bundled fixture corpus trains")
        })
    }

    /// Raw text of the bundled hand-tagged fixture corpus.
    pub fn fixture_corpus_text() -> &'static str {
        DEFAULT_FIXTURE_TEXT
    }
}

fn token_features(surfaces: &[String], i: usize, prev_tag: &str, prev2_tag: &str) -> Vec<String> {
    let lowered = surfaces[i].to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut features = Vec::with_capacity(11);
    features.push(format!("w={lowered}"));
    for n in 1..=3usize {
        if chars.len() >= n {
            let suffix: String = chars[chars.len() - n..].iter().collect();
            features.push(format!("s{n}={suffix}"));
        }
    }
    if let Some(first) = chars.first() {
        features.push(format!("p1={first}"));
    }
    if chars.iter().any(|c| c.is_ascii_digit()) {
        features.push("digit".to_string());
    }
    if chars.contains(&'-') {
        features.push("hyphen".to_string());
    }
    features.push(format!("t1={prev_tag}"));
    features.push(format!("t2={prev2_tag}"));
    let prev_word = if i > 0 {
        surfaces[i - 1].as_str()
    } else {
        BOUNDARY_WORD_LEFT
    };
    features.push(format!("pw={prev_word}"));
    let next_word = surfaces
        .get(i + 1)
        .map(String::as_str)
        .unwrap_or(BOUNDARY_WORD_RIGHT);
    features.push(format!("nw={next_word}"));
    features
}

struct AveragedTrainer {
    weights: BTreeMap<String, BTreeMap<String, f64>>,
    totals: BTreeMap<String, BTreeMap<String, f64>>,
    stamps: BTreeMap<String, BTreeMap<String, u64>>,
    instances: u64,
}

impl AveragedTrainer {
    fn new() -> Self {
        AveragedTrainer {
            weights: BTreeMap::new(),
            totals: BTreeMap::new(),
            stamps: BTreeMap::new(),
            instances: 0,
        }
    }

    fn update_one(&mut self, feature: &str, tag: &str, delta: f64) {
        let w = self
            .weights
            .entry(feature.to_string())
            .or_default()
            .entry(tag.to_string())
            .or_insert(0.0);
        let stamp = self
            .stamps
            .entry(feature.to_string())
            .or_default()
            .entry(tag.to_string())
            .or_insert(0);
        let total = self
            .totals
            .entry(feature.to_string())
            .or_default()
            .entry(tag.to_string())
            .or_insert(0.0);
        *total += (self.instances - *stamp) as f64 * *w;
        *stamp = self.instances;
        *w += delta;
    }

    fn apply_mistake(&mut self, features: &[String], gold: &str, guess: &str) {
        for feature in features {
            self.update_one(feature, gold, 1.0);
            self.update_one(feature, guess, -1.0);
        }
    }

    fn averaged_weights(mut self) -> BTreeMap<String, BTreeMap<String, f64>> {
        if self.instances == 0 {
            return self.weights;
        }
        let n = self.instances as f64;
        let mut averaged: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (feature, per_tag) in &self.weights {
            for (tag, w) in per_tag {
                let stamp = self.stamps[feature][tag];
                let total =
                    self.totals[feature][tag] + (self.instances - stamp) as f64 * *w;
                let avg = total / n;
                if avg != 0.0 {
                    averaged
                        .entry(feature.clone())
                        .or_default()
                        .insert(tag.clone(), avg);
                }
            }
        }
        self.weights = BTreeMap::new();
        averaged
    }
}

/// Train an averaged-perceptron tagger.
///
/// Gold tags must belong to the default [`TagSet`]; sentences are shuffled
/// each epoch with a ChaCha stream seeded from `seed`. Tokens the special
/// rules cover are emitted by rule during training (they feed tag context
/// but never produce weight updates).
pub fn train_tagger(
    corpus: &[TaggedSentence],
    epochs: usize,
    seed: u64,
) -> Result<TaggerModel, TagError> {
    if corpus.is_empty() || corpus.iter().all(|s| s.tokens.is_empty()) {
        return Err(TagError::EmptyCorpus);
    }
    let tagset = TagSet::default();
    let mut priors: BTreeMap<String, u64> = BTreeMap::new();
    for (idx, sentence) in corpus.iter().enumerate() {
        if sentence.tokens.len() != sentence.tags.len() {
            return Err(TagError::LengthMismatch {
                sentence: idx,
                tokens: sentence.tokens.len(),
                tags: sentence.tags.len(),
            });
        }
        for tag in &sentence.tags {
            if !tagset.contains(tag) {
                return Err(TagError::UnknownTag {
                    sentence: idx,
                    tag: tag.clone(),
                });
            }
            *priors.entry(tag.clone()).or_insert(0) += 1;
        }
    }

    let candidates = candidate_order(&priors);
    let cand_index = candidate_index(&candidates);
    let mut trainer = AveragedTrainer::new();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let sentence = &corpus[si];
            let mut prev = START_TAG.to_string();
            let mut prev2 = START_TAG.to_string();
            for i in 0..sentence.tokens.len() {
                let surface = &sentence.tokens[i];
                let emitted = if let Some(rule_tag) = special_tag(surface) {
                    rule_tag.to_string()
                } else {
                    trainer.instances += 1;
                    let features = token_features(&sentence.tokens, i, &prev, &prev2);
                    let guess =
                        predict_tag(&trainer.weights, &features, &candidates, &cand_index);
                    if guess != sentence.tags[i] {
                        trainer.apply_mistake(&features, &sentence.tags[i], &guess);
                    }
                    guess
                };
                prev2 = prev;
                prev = emitted;
            }
        }
    }

    Ok(TaggerModel {
        version: TAGGER_MODEL_VERSION,
        feature_weights: trainer.averaged_weights(),
        tag_priors: priors,
    })
}

/// Tag a normalized token sequence.
///
/// Special-rule tokens are tagged by rule; everything else by the model.
/// Predicted tags (including rule tags) feed the left context.
pub fn tag(tokens: &[Token], model: &TaggerModel) -> Vec<String> {
    let surfaces: Vec<String> = tokens.iter().map(|t| t.surface.clone()).collect();
    let candidates = candidate_order(&model.tag_priors);
    let index = candidate_index(&candidates);
    let mut tags = Vec::with_capacity(surfaces.len());
    let mut prev = START_TAG.to_string();
    let mut prev2 = START_TAG.to_string();
    for i in 0..surfaces.len() {
        let chosen = if let Some(rule_tag) = special_tag(&surfaces[i]) {
            rule_tag.to_string()
        } else {
            let features = token_features(&surfaces, i, &prev, &prev2);
            predict_tag(&model.feature_weights, &features, &candidates, &index)
        };
        prev2 = prev;
        prev = chosen.clone();
        tags.push(chosen);
    }
    tags
}

/// Parse a hand-tagged corpus: one sentence per line, tokens as
/// `surface_TAG` separated by whitespace. Lines starting with `# `
/// (or consisting of a bare `#`) are comments; a line may still begin
/// with a hashtag token such as `#flu_HT`.
pub fn parse_tagged_corpus(text: &str) -> Result<Vec<TaggedSentence>, TagError> {
    let mut sentences = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line == "#" || line.starts_with("# ") {
            continue;
        }
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for piece in line.split_whitespace() {
            let (surface, tag) = piece.rsplit_once('_').ok_or_else(|| TagError::Syntax {
                line: line_no,
                message: format!("token {piece:?} is not of the form surface_TAG"),
            })?;
            if surface.is_empty() || tag.is_empty() {
                return Err(TagError::Syntax {
                    line: line_no,
                    message: format!("token {piece:?} has an empty surface or tag"),
                });
            }
            tokens.push(surface.to_string());
            tags.push(tag.to_string());
        }
        sentences.push(TaggedSentence { tokens, tags });
    }
    Ok(sentences)
}

/// Render a tagged sentence in the `surface_TAG` line format.
pub fn format_tagged(tokens: &[Token], tags: &[String]) -> String {
    tokens
        .iter()
        .zip(tags)
        .map(|(t, tag)| format!("{}_{}", t.surface, tag))
        .collect::<Vec<_>>()
        .join(" ")
}

const DEFAULT_FIXTURE_TEXT: &str = include_str!("../data/pos_fixture.txt");
