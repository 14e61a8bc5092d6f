//! Distributed-memory document embeddings over symbol sequences.
//!
//! Each document and each vocabulary symbol gets a dense vector. At every
//! token position the document vector and the input vectors of the
//! surrounding symbols (a window either side) are averaged into a context
//! vector, which is scored against the output vector of the observed
//! symbol and against a handful of noise symbols drawn from a smoothed
//! unigram distribution. Observed scores are pushed up, noise scores
//! down, and the gradient with respect to the context vector is shared
//! equally among its contributors.
//!
//! All gradients for one position are computed from the parameter values
//! at the start of that position, then applied; [`position_gradients`]
//! exposes exactly the quantities the trainer applies, so its output can
//! be checked against finite differences of [`position_loss`].
//!
//! Training visits documents in corpus order with a linearly decaying
//! step size. A single seeded generator drives initialization and noise
//! sampling, so equal inputs give bit-identical models.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::CnfDocument;
use crate::numeric::{dot, l2_norm, log_sigmoid, sigmoid, stable_fingerprint};

/// Format version written into saved embeddings.
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("corpus has no symbols to learn from")]
    EmptyCorpus,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("symbol {0:?} is not in the vocabulary")]
    UnknownSymbol(String),
    #[error("serialization error: {0}")]
    Serde(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Hyperparameters for embedding training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    /// Vector dimensionality.
    pub dim: usize,
    /// Context radius: symbols up to this many positions away contribute.
    pub window: usize,
    /// Noise symbols scored per position.
    pub negative: usize,
    pub epochs: usize,
    /// Step size at the first position.
    pub alpha_start: f64,
    /// Step size approached at the last position.
    pub alpha_end: f64,
    pub seed: u64,
    /// Unigram counts are raised to this power before normalizing into
    /// the noise distribution.
    pub noise_exponent: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 200,
            window: 5,
            negative: 8,
            epochs: 20,
            alpha_start: 0.025,
            alpha_end: 0.0001,
            seed: 42,
            noise_exponent: 0.75,
        }
    }
}

impl EmbeddingConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::BadConfig("dim must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(EmbedError::BadConfig("window must be at least 1".into()));
        }
        if self.negative == 0 {
            return Err(EmbedError::BadConfig("negative must be at least 1".into()));
        }
        if self.alpha_start <= 0.0
            || self.alpha_end <= 0.0
            || self.alpha_start.is_nan()
            || self.alpha_end.is_nan()
        {
            return Err(EmbedError::BadConfig("step sizes must be positive".into()));
        }
        if self.alpha_end > self.alpha_start {
            return Err(EmbedError::BadConfig(
                "alpha_end must not exceed alpha_start".into(),
            ));
        }
        if self.noise_exponent < 0.0 || self.noise_exponent.is_nan() {
            return Err(EmbedError::BadConfig(
                "noise_exponent must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Sampler for the smoothed unigram noise distribution.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    cdf: Vec<f64>,
}

/// How many redraws [`NoiseTable::sample_avoiding`] attempts before
/// accepting a draw equal to the avoided symbol (only reachable when the
/// distribution is concentrated on that symbol).
const MAX_REDRAWS: usize = 100;

impl NoiseTable {
    /// Build from raw unigram counts. At least one count must be positive.
    pub fn new(counts: &[u64], exponent: f64) -> Result<Self, EmbedError> {
        if counts.is_empty() || counts.iter().all(|&c| c == 0) {
            return Err(EmbedError::BadConfig(
                "noise distribution needs at least one observed symbol".into(),
            ));
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(exponent) })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cdf.push(acc);
        }
        // Guard the tail against rounding so every uniform draw lands.
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(NoiseTable { cdf })
    }

    /// Probability of each symbol.
    pub fn probs(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Draw one symbol index.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    /// Draw one symbol index, redrawing while it equals `avoid`.
    pub fn sample_avoiding(&self, rng: &mut impl Rng, avoid: usize) -> usize {
        let mut draw = self.sample(rng);
        for _ in 0..MAX_REDRAWS {
            if draw != avoid {
                break;
            }
            draw = self.sample(rng);
        }
        draw
    }
}

/// A trained embedding: symbol vectors, document vectors, and the
/// configuration and counts needed to extend it to unseen documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub version: u32,
    pub config: EmbeddingConfig,
    /// Symbols in first-seen corpus order.
    pub vocab: Vec<String>,
    /// Training-corpus occurrence count of each symbol.
    pub counts: Vec<u64>,
    /// Source ids of the training documents, in corpus order.
    pub doc_ids: Vec<String>,
    /// Input vectors, `vocab.len() * dim`, row-major.
    pub input: Vec<f64>,
    /// Output vectors, `vocab.len() * dim`, row-major.
    pub output: Vec<f64>,
    /// Document vectors, `doc_ids.len() * dim`, row-major.
    pub docs: Vec<f64>,
}

/// One trainable row of an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamRef {
    /// Input vector of a vocabulary symbol.
    Input(usize),
    /// Output vector of a vocabulary symbol.
    Output(usize),
    /// Document vector.
    Doc(usize),
}

/// Loss and per-row gradients at one position, one entry per distinct
/// row, sorted by [`ParamRef`].
#[derive(Debug, Clone, PartialEq)]
pub struct PositionGradients {
    pub loss: f64,
    pub rows: Vec<(ParamRef, Vec<f64>)>,
}

fn init_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let span = 0.5 / dim as f64;
    (0..dim).map(|_| rng.random_range(-span..span)).collect()
}

/// Context positions contributing at `position`: indices within `window`
/// either side, excluding the position itself.
fn context_positions(len: usize, position: usize, window: usize) -> Vec<usize> {
    let lo = position.saturating_sub(window);
    let hi = (position + window).min(len.saturating_sub(1));
    (lo..=hi).filter(|&j| j != position).collect()
}

/// Mean of the document vector and the context input vectors. Returns
/// the mean and the contributor count `m`.
fn context_mean(
    input: &[f64],
    dim: usize,
    doc_vec: &[f64],
    symbols: &[usize],
    context: &[usize],
) -> (Vec<f64>, usize) {
    let mut vc = doc_vec.to_vec();
    for &j in context {
        let row = &input[symbols[j] * dim..(symbols[j] + 1) * dim];
        for (a, b) in vc.iter_mut().zip(row) {
            *a += b;
        }
    }
    let m = 1 + context.len();
    for a in &mut vc {
        *a /= m as f64;
    }
    (vc, m)
}

/// Borrowed view of the parameters one position update reads.
struct NetView<'a> {
    input: &'a [f64],
    output: &'a [f64],
    dim: usize,
    doc_vec: &'a [f64],
    window: usize,
}

fn loss_at(net: &NetView<'_>, symbols: &[usize], position: usize, noise: &[usize]) -> f64 {
    let dim = net.dim;
    let context = context_positions(symbols.len(), position, net.window);
    let (vc, _) = context_mean(net.input, dim, net.doc_vec, symbols, &context);
    let observed = symbols[position];
    let u_obs = &net.output[observed * dim..(observed + 1) * dim];
    let mut loss = -log_sigmoid(dot(u_obs, &vc));
    for &n in noise {
        let u_n = &net.output[n * dim..(n + 1) * dim];
        loss -= log_sigmoid(-dot(u_n, &vc));
    }
    loss
}

fn gradients_at(
    net: &NetView<'_>,
    doc_ref: usize,
    symbols: &[usize],
    position: usize,
    noise: &[usize],
) -> PositionGradients {
    let dim = net.dim;
    let context = context_positions(symbols.len(), position, net.window);
    let (vc, m) = context_mean(net.input, dim, net.doc_vec, symbols, &context);
    let observed = symbols[position];

    let mut rows: BTreeMap<ParamRef, Vec<f64>> = BTreeMap::new();
    let mut grad_vc = vec![0.0; dim];
    let mut loss = 0.0;

    // Observed symbol: push its output score toward 1.
    let u_obs = &net.output[observed * dim..(observed + 1) * dim];
    let score = dot(u_obs, &vc);
    loss -= log_sigmoid(score);
    let g = sigmoid(score) - 1.0;
    let entry = rows
        .entry(ParamRef::Output(observed))
        .or_insert_with(|| vec![0.0; dim]);
    for ((e, &v), (gv, &u)) in entry
        .iter_mut()
        .zip(&vc)
        .zip(grad_vc.iter_mut().zip(u_obs))
    {
        *e += g * v;
        *gv += g * u;
    }

    // Noise symbols: push their output scores toward 0.
    for &n in noise {
        let u_n = &net.output[n * dim..(n + 1) * dim];
        let score = dot(u_n, &vc);
        loss -= log_sigmoid(-score);
        let g = sigmoid(score);
        let entry = rows
            .entry(ParamRef::Output(n))
            .or_insert_with(|| vec![0.0; dim]);
        for ((e, &v), (gv, &u)) in entry
            .iter_mut()
            .zip(&vc)
            .zip(grad_vc.iter_mut().zip(u_n))
        {
            *e += g * v;
            *gv += g * u;
        }
    }

    // Each contributor to the context mean receives an equal share.
    let share: Vec<f64> = grad_vc.iter().map(|g| g / m as f64).collect();
    let doc_entry = rows
        .entry(ParamRef::Doc(doc_ref))
        .or_insert_with(|| vec![0.0; dim]);
    for (e, s) in doc_entry.iter_mut().zip(&share) {
        *e += s;
    }
    for &j in &context {
        let entry = rows
            .entry(ParamRef::Input(symbols[j]))
            .or_insert_with(|| vec![0.0; dim]);
        for (e, s) in entry.iter_mut().zip(&share) {
            *e += s;
        }
    }

    PositionGradients {
        loss,
        rows: rows.into_iter().collect(),
    }
}

/// Loss at one training position with the noise draws fixed.
///
/// `symbols` is the document as vocabulary indices; `noise` lists the
/// sampled noise symbols. Deterministic, so it can be differenced
/// numerically against [`position_gradients`].
pub fn position_loss(
    embedding: &Embedding,
    doc: usize,
    symbols: &[usize],
    position: usize,
    noise: &[usize],
) -> f64 {
    let net = NetView {
        input: &embedding.input,
        output: &embedding.output,
        dim: embedding.config.dim,
        doc_vec: embedding.doc_vector(doc),
        window: embedding.config.window,
    };
    loss_at(&net, symbols, position, noise)
}

/// Analytic gradients at one training position with the noise draws
/// fixed. These are exactly the quantities the trainer scales by the
/// step size and subtracts.
pub fn position_gradients(
    embedding: &Embedding,
    doc: usize,
    symbols: &[usize],
    position: usize,
    noise: &[usize],
) -> PositionGradients {
    let net = NetView {
        input: &embedding.input,
        output: &embedding.output,
        dim: embedding.config.dim,
        doc_vec: embedding.doc_vector(doc),
        window: embedding.config.window,
    };
    gradients_at(&net, doc, symbols, position, noise)
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.vocab.iter().position(|s| s == symbol)
    }

    pub fn input_vector(&self, index: usize) -> &[f64] {
        &self.input[index * self.config.dim..(index + 1) * self.config.dim]
    }

    pub fn output_vector(&self, index: usize) -> &[f64] {
        &self.output[index * self.config.dim..(index + 1) * self.config.dim]
    }

    pub fn doc_vector(&self, index: usize) -> &[f64] {
        &self.docs[index * self.config.dim..(index + 1) * self.config.dim]
    }

    /// Vector of the training document with this source id.
    pub fn doc_vector_by_id(&self, id: &str) -> Option<&[f64]> {
        self.doc_ids
            .iter()
            .position(|d| d == id)
            .map(|i| self.doc_vector(i))
    }

    /// Stable identity, for checking a classifier was trained on this
    /// embedding's document vectors.
    pub fn fingerprint(&self) -> u64 {
        let dim = self.config.dim.to_string();
        let parts = std::iter::once(dim.as_str())
            .chain(self.vocab.iter().map(String::as_str));
        stable_fingerprint(parts)
    }

    /// The `k` nearest symbols to `symbol` by cosine over input vectors,
    /// excluding the symbol itself. Ties break toward the lower
    /// vocabulary index.
    pub fn most_similar(&self, symbol: &str, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        let query = self
            .index_of(symbol)
            .ok_or_else(|| EmbedError::UnknownSymbol(symbol.to_string()))?;
        let qv = self.input_vector(query);
        let qn = l2_norm(qv);
        let mut scored: Vec<(usize, f64)> = (0..self.vocab_size())
            .filter(|&i| i != query)
            .map(|i| {
                let v = self.input_vector(i);
                let denom = qn * l2_norm(v);
                let cos = if denom == 0.0 { 0.0 } else { dot(qv, v) / denom };
                (i, cos)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, c)| (self.vocab[i].clone(), c))
            .collect())
    }

    /// Embed a document that was not part of training.
    ///
    /// Symbol vectors stay frozen; a fresh document vector is
    /// initialized from `seed` and trained for `epochs` passes over the
    /// document (zero epochs returns the initial vector). Symbols
    /// outside the vocabulary are dropped.
    pub fn infer_doc(&self, symbols: &[String], epochs: usize, seed: u64) -> Vec<f64> {
        let dim = self.config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_vec = init_vector(&mut rng, dim);
        let indices: Vec<usize> = symbols
            .iter()
            .filter_map(|s| self.index_of(s))
            .collect();
        if indices.is_empty() || epochs == 0 {
            return doc_vec;
        }
        let table = NoiseTable::new(&self.counts, self.config.noise_exponent)
            .expect("trained embedding has counts");
        let total = (indices.len() * epochs) as f64;
        let mut t = 0usize;
        for _ in 0..epochs {
            for position in 0..indices.len() {
                let alpha = self.config.alpha_start
                    + (self.config.alpha_end - self.config.alpha_start) * (t as f64 / total);
                let observed = indices[position];
                let noise: Vec<usize> = (0..self.config.negative)
                    .map(|_| table.sample_avoiding(&mut rng, observed))
                    .collect();
                let net = NetView {
                    input: &self.input,
                    output: &self.output,
                    dim,
                    doc_vec: &doc_vec,
                    window: self.config.window,
                };
                let grads = gradients_at(&net, 0, &indices, position, &noise);
                for (row, g) in &grads.rows {
                    if matches!(row, ParamRef::Doc(_)) {
                        for (d, gi) in doc_vec.iter_mut().zip(g) {
                            *d -= alpha * gi;
                        }
                    }
                }
                t += 1;
            }
        }
        doc_vec
    }

    pub fn to_json_string(&self) -> Result<String, EmbedError> {
        serde_json::to_string(self).map_err(|e| EmbedError::Serde(e.to_string()))
    }

    pub fn from_json_str(json: &str) -> Result<Self, EmbedError> {
        serde_json::from_str(json).map_err(|e| EmbedError::Serde(e.to_string()))
    }

    pub fn save(&self, mut writer: impl Write) -> Result<(), EmbedError> {
        let json = self.to_json_string()?;
        writer
            .write_all(json.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|e| EmbedError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let mut json = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut json))
            .map_err(|e| EmbedError::Io(e.to_string()))?;
        Self::from_json_str(&json)
    }
}

/// Deterministic expectation of the per-position loss under the noise
/// distribution, averaged over every position of `docs` (which must be
/// the embedding's training corpus, in order). Used to verify that
/// training drives the objective down without depending on particular
/// noise draws. Returns 0 when there are no positions.
pub fn expected_mean_loss(embedding: &Embedding, docs: &[CnfDocument]) -> f64 {
    let dim = embedding.config.dim;
    let k = embedding.config.negative as f64;
    let table = match NoiseTable::new(&embedding.counts, embedding.config.noise_exponent) {
        Ok(t) => t,
        Err(_) => return 0.0,
    };
    let probs = table.probs();
    let mut total = 0.0;
    let mut positions = 0usize;
    for (doc_idx, doc) in docs.iter().enumerate() {
        let symbols: Vec<usize> = doc
            .symbols
            .iter()
            .filter_map(|s| embedding.index_of(s))
            .collect();
        let doc_vec = embedding.doc_vector(doc_idx);
        for position in 0..symbols.len() {
            let context = context_positions(symbols.len(), position, embedding.config.window);
            let (vc, _) = context_mean(&embedding.input, dim, doc_vec, &symbols, &context);
            let observed = symbols[position];
            let u_obs = embedding.output_vector(observed);
            let mut loss = -log_sigmoid(dot(u_obs, &vc));
            let p_obs = probs[observed];
            if 1.0 - p_obs > 1e-12 {
                // Noise is drawn conditioned on not being the observed
                // symbol, so weight by the renormalized distribution.
                let mut expected_noise = 0.0;
                for (w, &p) in probs.iter().enumerate() {
                    if w == observed || p == 0.0 {
                        continue;
                    }
                    let u_w = embedding.output_vector(w);
                    expected_noise += (p / (1.0 - p_obs)) * -log_sigmoid(-dot(u_w, &vc));
                }
                loss += k * expected_noise;
            } else {
                // Degenerate distribution: redraws exhaust and the
                // observed symbol itself is kept as noise.
                loss += k * -log_sigmoid(-dot(u_obs, &vc));
            }
            total += loss;
            positions += 1;
        }
    }
    if positions == 0 {
        0.0
    } else {
        total / positions as f64
    }
}

fn train_impl(
    docs: &[CnfDocument],
    config: &EmbeddingConfig,
    trace: bool,
) -> Result<(Embedding, Vec<f64>), EmbedError> {
    config.validate()?;

    let mut vocab: Vec<String> = Vec::new();
    let mut vocab_index: HashMap<String, usize> = HashMap::new();
    let mut counts: Vec<u64> = Vec::new();
    for doc in docs {
        for symbol in &doc.symbols {
            match vocab_index.get(symbol) {
                Some(&i) => counts[i] += 1,
                None => {
                    vocab_index.insert(symbol.clone(), vocab.len());
                    vocab.push(symbol.clone());
                    counts.push(1);
                }
            }
        }
    }
    if vocab.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = Vec::with_capacity(vocab.len() * dim);
    for _ in 0..vocab.len() {
        input.extend(init_vector(&mut rng, dim));
    }
    let mut doc_vecs = Vec::with_capacity(docs.len() * dim);
    for _ in 0..docs.len() {
        doc_vecs.extend(init_vector(&mut rng, dim));
    }
    let output = vec![0.0; vocab.len() * dim];

    let mut embedding = Embedding {
        version: EMBEDDING_VERSION,
        config: config.clone(),
        vocab,
        counts,
        doc_ids: docs.iter().map(|d| d.source_id.clone()).collect(),
        input,
        output,
        docs: doc_vecs,
    };

    let doc_symbols: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| {
            d.symbols
                .iter()
                .map(|s| vocab_index[s])
                .collect()
        })
        .collect();

    let table = NoiseTable::new(&embedding.counts, config.noise_exponent)?;
    let positions_per_epoch: usize = doc_symbols.iter().map(Vec::len).sum();
    let total = (positions_per_epoch * config.epochs) as f64;

    let mut loss_trace = Vec::new();
    if trace {
        loss_trace.push(expected_mean_loss(&embedding, docs));
    }

    let mut t = 0usize;
    for _ in 0..config.epochs {
        for (doc_idx, symbols) in doc_symbols.iter().enumerate() {
            for position in 0..symbols.len() {
                let alpha = config.alpha_start
                    + (config.alpha_end - config.alpha_start) * (t as f64 / total);
                let observed = symbols[position];
                let noise: Vec<usize> = (0..config.negative)
                    .map(|_| table.sample_avoiding(&mut rng, observed))
                    .collect();
                let grads = position_gradients(&embedding, doc_idx, symbols, position, &noise);
                for (row, g) in &grads.rows {
                    let target = match *row {
                        ParamRef::Input(i) => {
                            &mut embedding.input[i * dim..(i + 1) * dim]
                        }
                        ParamRef::Output(i) => {
                            &mut embedding.output[i * dim..(i + 1) * dim]
                        }
                        ParamRef::Doc(i) => &mut embedding.docs[i * dim..(i + 1) * dim],
                    };
                    for (v, gi) in target.iter_mut().zip(g) {
                        *v -= alpha * gi;
                    }
                }
                t += 1;
            }
        }
        if trace {
            loss_trace.push(expected_mean_loss(&embedding, docs));
        }
    }

    Ok((embedding, loss_trace))
}

/// Train document and symbol vectors on a corpus.
pub fn train_embeddings(
    docs: &[CnfDocument],
    config: &EmbeddingConfig,
) -> Result<Embedding, EmbedError> {
    train_impl(docs, config, false).map(|(e, _)| e)
}

/// Like [`train_embeddings`], also returning the expected mean loss
/// before training and after each epoch. The extra evaluation costs a
/// full pass over corpus and vocabulary per epoch, so reserve this for
/// small corpora.
pub fn train_embeddings_traced(
    docs: &[CnfDocument],
    config: &EmbeddingConfig,
) -> Result<(Embedding, Vec<f64>), EmbedError> {
    train_impl(docs, config, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn doc(id: &str, symbols: &[&str]) -> CnfDocument {
        CnfDocument {
            source_id: id.to_string(),
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
            label: None,
            dataset: None,
        }
    }

    fn toy_corpus() -> Vec<CnfDocument> {
        vec![
            doc("d0", &["A", "B", "C", "A"]),
            doc("d1", &["B", "C", "D"]),
            doc("d2", &["A", "D", "D", "B"]),
            doc("d3", &["C", "A", "B"]),
        ]
    }

    fn small_config() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 6,
            window: 2,
            negative: 3,
            epochs: 5,
            alpha_start: 0.05,
            alpha_end: 0.001,
            seed: 7,
            noise_exponent: 0.75,
        }
    }

    #[test]
    fn config_validation_rejects_degenerate_values() {
        let base = small_config();
        for (field, cfg) in [
            ("dim", EmbeddingConfig { dim: 0, ..base.clone() }),
            ("window", EmbeddingConfig { window: 0, ..base.clone() }),
            ("negative", EmbeddingConfig { negative: 0, ..base.clone() }),
            ("alpha", EmbeddingConfig { alpha_start: 0.0, ..base.clone() }),
            (
                "alpha order",
                EmbeddingConfig { alpha_end: 1.0, alpha_start: 0.5, ..base.clone() },
            ),
            (
                "exponent",
                EmbeddingConfig { noise_exponent: f64::NAN, ..base.clone() },
            ),
        ] {
            assert!(
                matches!(
                    train_embeddings(&toy_corpus(), &cfg),
                    Err(EmbedError::BadConfig(_))
                ),
                "expected rejection for {field}"
            );
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert_eq!(
            train_embeddings(&[], &small_config()).unwrap_err(),
            EmbedError::EmptyCorpus
        );
        assert_eq!(
            train_embeddings(&[doc("d0", &[])], &small_config()).unwrap_err(),
            EmbedError::EmptyCorpus
        );
    }

    #[test]
    fn vocabulary_is_first_seen_order_with_counts() {
        let emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        assert_eq!(emb.vocab, vec!["A", "B", "C", "D"]);
        assert_eq!(emb.counts, vec![4, 4, 3, 3]);
        assert_eq!(emb.doc_ids, vec!["d0", "d1", "d2", "d3"]);
        assert_eq!(emb.input.len(), 4 * 6);
        assert_eq!(emb.docs.len(), 4 * 6);
    }

    #[test]
    fn zero_epochs_leaves_initialization_untouched() {
        let cfg = EmbeddingConfig { epochs: 0, ..small_config() };
        let emb = train_embeddings(&toy_corpus(), &cfg).unwrap();
        assert!(emb.output.iter().all(|&v| v == 0.0));
        let span = 0.5 / cfg.dim as f64;
        assert!(emb.input.iter().chain(&emb.docs).all(|&v| v.abs() < span));
        assert!(emb.input.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn training_is_bit_deterministic_per_seed() {
        let a = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        let b = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());

        let other = EmbeddingConfig { seed: 8, ..small_config() };
        let c = train_embeddings(&toy_corpus(), &other).unwrap();
        assert_ne!(a.input, c.input);
    }

    #[test]
    fn noise_table_follows_smoothed_counts() {
        let table = NoiseTable::new(&[8, 1, 0, 27], 1.0 / 3.0).unwrap();
        let probs = table.probs();
        // Weights 2, 1, 0, 3 after the cube root.
        assert_relative_eq!(probs[0], 2.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(probs[1], 1.0 / 6.0, max_relative = 1e-12);
        assert_eq!(probs[2], 0.0);
        assert_relative_eq!(probs[3], 3.0 / 6.0, max_relative = 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = [0usize; 4];
        let draws = 20_000;
        for _ in 0..draws {
            hits[table.sample(&mut rng)] += 1;
        }
        assert_eq!(hits[2], 0, "zero-count symbol must never be drawn");
        for (i, &h) in hits.iter().enumerate() {
            assert!(
                (h as f64 / draws as f64 - probs[i]).abs() < 0.02,
                "symbol {i}: {h} draws vs prob {}",
                probs[i]
            );
        }
    }

    #[test]
    fn noise_table_exponent_zero_is_uniform_over_observed() {
        let table = NoiseTable::new(&[5, 0, 500], 0.0).unwrap();
        let probs = table.probs();
        assert_relative_eq!(probs[0], 0.5, max_relative = 1e-12);
        assert_eq!(probs[1], 0.0);
        assert_relative_eq!(probs[2], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn noise_table_rejects_empty_and_avoids_observed() {
        assert!(NoiseTable::new(&[], 0.75).is_err());
        assert!(NoiseTable::new(&[0, 0], 0.75).is_err());

        let table = NoiseTable::new(&[10, 10], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(table.sample_avoiding(&mut rng, 0), 1);
        }
        // With the whole mass on one symbol, redraws exhaust and the
        // avoided symbol comes back.
        let degenerate = NoiseTable::new(&[7], 1.0).unwrap();
        assert_eq!(degenerate.sample_avoiding(&mut rng, 0), 0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        let symbols: Vec<usize> = vec![0, 1, 2, 0]; // d0
        let position = 1;
        let noise = vec![3, 2, 3];
        let h = 1e-5;

        fn slot(e: &mut Embedding, row: ParamRef, coord: usize) -> &mut f64 {
            let dim = e.config.dim;
            match row {
                ParamRef::Input(i) => &mut e.input[i * dim + coord],
                ParamRef::Output(i) => &mut e.output[i * dim + coord],
                ParamRef::Doc(i) => &mut e.docs[i * dim + coord],
            }
        }

        let grads = position_gradients(&emb, 0, &symbols, position, &noise);
        assert!(grads.loss.is_finite());
        for (row, analytic) in grads.rows.clone() {
            for (coord, &a) in analytic.iter().enumerate() {
                let original = *slot(&mut emb, row, coord);
                *slot(&mut emb, row, coord) = original + h;
                let up = position_loss(&emb, 0, &symbols, position, &noise);
                *slot(&mut emb, row, coord) = original - h;
                let down = position_loss(&emb, 0, &symbols, position, &noise);
                *slot(&mut emb, row, coord) = original;
                let numeric = (up - down) / (2.0 * h);
                let denom = a.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    ((a - numeric) / denom).abs() < 1e-4,
                    "{row:?}[{coord}]: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn repeated_context_symbols_aggregate_into_one_row() {
        let emb = train_embeddings(&[doc("d", &["A", "A", "B", "A"])], &small_config()).unwrap();
        let symbols = vec![0, 0, 1, 0];
        let grads = position_gradients(&emb, 0, &symbols, 2, &[0, 0]);
        let input_rows: Vec<_> = grads
            .rows
            .iter()
            .filter(|(r, _)| matches!(r, ParamRef::Input(_)))
            .collect();
        // Symbol A appears three times in context but gets one row.
        assert_eq!(input_rows.len(), 1);
        let output_rows: Vec<_> = grads
            .rows
            .iter()
            .filter(|(r, _)| matches!(r, ParamRef::Output(_)))
            .collect();
        // Observed B plus noise A, with the repeated noise draw merged.
        assert_eq!(output_rows.len(), 2);
    }

    #[test]
    fn expected_loss_decreases_under_training() {
        let cfg = EmbeddingConfig { epochs: 25, ..small_config() };
        let (emb, trace) = train_embeddings_traced(&toy_corpus(), &cfg).unwrap();
        assert_eq!(trace.len(), cfg.epochs + 1);
        assert!(trace.iter().all(|l| l.is_finite() && *l > 0.0));
        assert!(
            trace.last().unwrap() < trace.first().unwrap(),
            "training should reduce expected loss: {trace:?}"
        );
        assert!(emb.output.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn infer_doc_is_deterministic_and_respects_zero_epochs() {
        let emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        let symbols: Vec<String> = vec!["A".into(), "C".into(), "B".into()];

        let frozen = emb.infer_doc(&symbols, 0, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(frozen, init_vector(&mut rng, emb.config.dim));

        let a = emb.infer_doc(&symbols, 10, 11);
        let b = emb.infer_doc(&symbols, 10, 11);
        assert_eq!(a, b);
        assert_ne!(a, frozen, "training epochs must move the vector");

        // Unknown symbols are dropped; an all-unknown doc keeps its
        // initial vector even with epochs.
        let unknown: Vec<String> = vec!["ZZ".into()];
        assert_eq!(emb.infer_doc(&unknown, 10, 11), frozen);
    }

    #[test]
    fn inference_does_not_mutate_the_embedding() {
        let emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        let before = emb.to_json_string().unwrap();
        let _ = emb.infer_doc(&["A".into(), "B".into()], 5, 3);
        assert_eq!(emb.to_json_string().unwrap(), before);
    }

    #[test]
    fn most_similar_ranks_by_cosine_and_excludes_query() {
        let dim = 2;
        let emb = Embedding {
            version: EMBEDDING_VERSION,
            config: EmbeddingConfig { dim, ..small_config() },
            vocab: vec!["A".into(), "B".into(), "C".into(), "D".into()],
            counts: vec![1, 1, 1, 1],
            doc_ids: vec![],
            input: vec![
                1.0, 0.0, // A
                0.6, 0.8, // B
                -1.0, 0.0, // C
                2.0, 0.0, // D: same direction as A
            ],
            output: vec![0.0; 8],
            docs: vec![],
        };
        let sims = emb.most_similar("A", 2).unwrap();
        assert_eq!(sims[0].0, "D");
        assert_relative_eq!(sims[0].1, 1.0, max_relative = 1e-12);
        assert_eq!(sims[1].0, "B");
        assert_relative_eq!(sims[1].1, 0.6, max_relative = 1e-12);

        let all = emb.most_similar("A", 10).unwrap();
        assert_eq!(all.len(), 3, "query itself is excluded");
        assert_eq!(all[2].0, "C");

        assert_eq!(
            emb.most_similar("Z", 3).unwrap_err(),
            EmbedError::UnknownSymbol("Z".into())
        );
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        let json = emb.to_json_string().unwrap();
        let back = Embedding::from_json_str(&json).unwrap();
        assert_eq!(emb, back);
        assert_eq!(back.to_json_string().unwrap(), json);
        assert_eq!(emb.fingerprint(), back.fingerprint());
    }

    #[test]
    fn doc_vector_lookup_by_id() {
        let emb = train_embeddings(&toy_corpus(), &small_config()).unwrap();
        assert_eq!(emb.doc_vector_by_id("d2").unwrap(), emb.doc_vector(2));
        assert!(emb.doc_vector_by_id("nope").is_none());
    }
}
