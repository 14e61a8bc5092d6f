//! Python bindings for the concept-rewrite and classification library.
//!
//! The module mirrors the Rust API at the level a notebook wants:
//! tokenize text, rewrite it into concept sequences, train taggers,
//! embeddings, linear classifiers, and full pipelines, and score the
//! results with the same deterministic arithmetic as the CLI.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use cnf_epi::cnf::{self, CnfDocument, CnfMode};
use cnf_epi::corpus::{Dataset, Record};
use cnf_epi::embed;
use cnf_epi::eval;
use cnf_epi::learn;
use cnf_epi::ontology;
use cnf_epi::pipeline;
use cnf_epi::postag;
use cnf_epi::textnorm;
use cnf_epi::vectorize::FeatureKind;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_error(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<CnfMode> {
    mode.parse().map_err(value_error)
}

/// A concept ontology: named concepts, each owning a disjoint word list.
#[pyclass(module = "cnf_epi_py")]
struct Ontology {
    inner: ontology::Ontology,
}

#[pymethods]
impl Ontology {
    /// Parse the native text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Ontology { inner: ontology::Ontology::parse(text).map_err(value_error)? })
    }

    /// The built-in starter ontology.
    #[staticmethod]
    fn starter() -> Self {
        Ontology { inner: ontology::Ontology::starter().clone() }
    }

    #[getter]
    fn concept_count(&self) -> usize {
        self.inner.concept_count()
    }

    #[getter]
    fn word_count(&self) -> usize {
        self.inner.word_count()
    }

    /// All concept names, in file order.
    fn concept_names(&self) -> Vec<String> {
        self.inner.concepts().iter().map(|c| c.name.clone()).collect()
    }

    /// The concept name a word maps to, or None.
    fn lookup(&self, word: &str) -> Option<String> {
        self.inner.lookup_name(word).map(str::to_string)
    }

    /// The ontology in its native text format.
    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Ontology({} concepts, {} words)",
            self.inner.concept_count(),
            self.inner.word_count()
        )
    }
}

/// An averaged-perceptron part-of-speech tagger.
#[pyclass(module = "cnf_epi_py")]
struct Tagger {
    inner: postag::TaggerModel,
}

#[pymethods]
impl Tagger {
    /// The built-in model trained on the bundled fixture corpus.
    #[staticmethod]
    fn default() -> Self {
        Tagger { inner: postag::TaggerModel::default_model().clone() }
    }

    /// Train on a corpus of `word_TAG` lines.
    #[staticmethod]
    #[pyo3(signature = (corpus_text, epochs=8, seed=42))]
    fn train(corpus_text: &str, epochs: usize, seed: u64) -> PyResult<Self> {
        let sentences = postag::parse_tagged_corpus(corpus_text).map_err(value_error)?;
        Ok(Tagger { inner: postag::train_tagger(&sentences, epochs, seed).map_err(value_error)? })
    }

    /// Tag a raw text line; returns (token, tag) pairs.
    fn tag(&self, text: &str) -> Vec<(String, String)> {
        let tokens = textnorm::normalize_tokenize(text);
        let tags = postag::tag(&tokens, &self.inner);
        tokens
            .into_iter()
            .zip(tags)
            .map(|(token, tag)| (token.surface, tag))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Tagger { inner: postag::TaggerModel::from_json_str(json).map_err(value_error)? })
    }
}

/// Normalize a raw message into lowercase tokens.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textnorm::surfaces(&textnorm::normalize_tokenize(text))
}

/// Rewrite a raw message into a concept sequence.
///
/// `mode` is "plain-oov" (unknown tokens become the OOV sentinel) or
/// "pos-padded" (unknown tokens become their part-of-speech tag).
#[pyfunction]
#[pyo3(signature = (text, ontology=None, tagger=None, mode="plain-oov"))]
fn transform_text(
    text: &str,
    ontology: Option<&Ontology>,
    tagger: Option<&Tagger>,
    mode: &str,
) -> PyResult<Vec<String>> {
    let mode = parse_mode(mode)?;
    let starter;
    let ont = match ontology {
        Some(o) => &o.inner,
        None => {
            starter = ontology::Ontology::starter();
            starter
        }
    };
    let default_tagger;
    let tag_model = match tagger {
        Some(t) => &t.inner,
        None => {
            default_tagger = postag::TaggerModel::default_model();
            default_tagger
        }
    };
    Ok(cnf::transform_text(text, ont, tag_model, mode, "py").symbols)
}

/// Map normalized tokens to concepts; unknown tokens become "OOV".
#[pyfunction]
fn to_cnf(tokens: Vec<String>, ontology: &Ontology) -> Vec<String> {
    let tokens: Vec<textnorm::Token> = tokens
        .into_iter()
        .enumerate()
        .map(|(i, surface)| textnorm::Token::new(surface, i))
        .collect();
    cnf::to_cnf(&tokens, &ontology.inner, "py").symbols
}

/// Map normalized tokens to concepts; unknown tokens take their tag.
#[pyfunction]
fn to_cnf_pos(tokens: Vec<String>, tags: Vec<String>, ontology: &Ontology) -> PyResult<Vec<String>> {
    let tokens: Vec<textnorm::Token> = tokens
        .into_iter()
        .enumerate()
        .map(|(i, surface)| textnorm::Token::new(surface, i))
        .collect();
    let doc = cnf::to_cnf_pos(&tokens, &tags, &ontology.inner, "py").map_err(value_error)?;
    Ok(doc.symbols)
}

fn docs_from_symbol_lists(docs: Vec<Vec<String>>, ids: Option<Vec<String>>) -> PyResult<Vec<CnfDocument>> {
    if let Some(ids) = &ids {
        if ids.len() != docs.len() {
            return Err(value_error(format!(
                "got {} ids for {} documents",
                ids.len(),
                docs.len()
            )));
        }
    }
    Ok(docs
        .into_iter()
        .enumerate()
        .map(|(i, symbols)| CnfDocument {
            source_id: match &ids {
                Some(ids) => ids[i].clone(),
                None => format!("doc{i}"),
            },
            symbols,
            label: None,
            dataset: None,
        })
        .collect())
}

/// Distributed-memory document embeddings over symbol sequences.
#[pyclass(module = "cnf_epi_py")]
struct Embedding {
    inner: embed::Embedding,
}

#[pymethods]
impl Embedding {
    /// Train on a list of symbol sequences.
    #[staticmethod]
    #[pyo3(signature = (docs, ids=None, dim=200, window=5, negative=8, epochs=20,
                        alpha_start=0.025, alpha_end=0.0001, seed=42, noise_exponent=0.75))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        docs: Vec<Vec<String>>,
        ids: Option<Vec<String>>,
        dim: usize,
        window: usize,
        negative: usize,
        epochs: usize,
        alpha_start: f64,
        alpha_end: f64,
        seed: u64,
        noise_exponent: f64,
    ) -> PyResult<Self> {
        let docs = docs_from_symbol_lists(docs, ids)?;
        let config = embed::EmbeddingConfig {
            dim,
            window,
            negative,
            epochs,
            alpha_start,
            alpha_end,
            seed,
            noise_exponent,
        };
        Ok(Embedding { inner: embed::train_embeddings(&docs, &config).map_err(value_error)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.inner.vocab.clone()
    }

    #[getter]
    fn doc_ids(&self) -> Vec<String> {
        self.inner.doc_ids.clone()
    }

    /// The `k` nearest symbols by cosine over input vectors.
    #[pyo3(signature = (symbol, k=10))]
    fn most_similar(&self, symbol: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        self.inner.most_similar(symbol, k).map_err(value_error)
    }

    /// Embed an unseen document with frozen symbol matrices.
    #[pyo3(signature = (symbols, epochs=20, seed=42))]
    fn infer(&self, symbols: Vec<String>, epochs: usize, seed: u64) -> Vec<f64> {
        self.inner.infer_doc(&symbols, epochs, seed)
    }

    /// The stored training-time vector for a document id, or None.
    fn doc_vector(&self, id: &str) -> Option<Vec<f64>> {
        self.inner.doc_vector_by_id(id).map(<[f64]>::to_vec)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(io_error)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Embedding { inner: embed::Embedding::from_json_str(json).map_err(value_error)? })
    }
}

/// A linear classifier trained by stochastic gradient descent.
#[pyclass(module = "cnf_epi_py")]
struct LinearClassifier {
    inner: learn::LinearModel,
}

#[pymethods]
impl LinearClassifier {
    /// Train on dense rows with 0/1 labels. `loss` is "hinge" or
    /// "logistic".
    #[staticmethod]
    #[pyo3(signature = (rows, labels, loss="hinge", epochs=50, alpha0=0.01, l2=0.0001,
                        seed=42, shuffle=true, normalize_rows=false))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        loss: &str,
        epochs: usize,
        alpha0: f64,
        l2: f64,
        seed: u64,
        shuffle: bool,
        normalize_rows: bool,
    ) -> PyResult<Self> {
        let loss = match loss {
            "hinge" => learn::Loss::Hinge,
            "logistic" => learn::Loss::Logistic,
            other => return Err(value_error(format!("unknown loss {other:?}"))),
        };
        let config = learn::TrainConfig {
            epochs,
            alpha0,
            l2,
            seed,
            shuffle,
            row_l2_normalize: normalize_rows,
        };
        Ok(LinearClassifier {
            inner: learn::train(&rows, &labels, loss, &config).map_err(value_error)?,
        })
    }

    /// The raw margin for one row.
    fn score(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.score(&row).map_err(value_error)
    }

    /// 1 when the margin is positive.
    fn predict(&self, row: Vec<f64>) -> PyResult<u8> {
        self.inner.predict(&row).map_err(value_error)
    }

    /// Probability of class 1 (logistic models only).
    fn predict_proba(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_proba(&row).map_err(value_error)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(io_error)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(LinearClassifier { inner: learn::LinearModel::from_json_str(json).map_err(value_error)? })
    }
}

/// A trained end-to-end pipeline: rewrite, featurize, classify.
#[pyclass(module = "cnf_epi_py")]
struct Pipeline {
    inner: pipeline::TrainedPipeline,
}

fn dataset_from_lists(ids: Vec<String>, texts: Vec<String>, labels: Option<Vec<u8>>) -> PyResult<Dataset> {
    if ids.len() != texts.len() {
        return Err(value_error(format!("got {} ids for {} texts", ids.len(), texts.len())));
    }
    if let Some(labels) = &labels {
        if labels.len() != texts.len() {
            return Err(value_error(format!(
                "got {} labels for {} texts",
                labels.len(),
                texts.len()
            )));
        }
    }
    let records = ids
        .into_iter()
        .zip(texts)
        .enumerate()
        .map(|(i, (id, text))| Record {
            id,
            text,
            label: labels.as_ref().map(|l| l[i]),
            dataset: None,
        })
        .collect();
    Ok(Dataset { name: "py".to_string(), records })
}

#[pymethods]
impl Pipeline {
    /// Train on parallel id/text/label lists.
    ///
    /// `classifier` is "bow-sgd" or "doc2vec-logreg"; `mode` is
    /// "plain-oov" or "pos-padded"; `features` is "unigram" or
    /// "unibigram" (bag-of-symbols classifiers only).
    #[staticmethod]
    #[pyo3(signature = (ids, texts, labels, classifier="bow-sgd", mode="plain-oov",
                        features="unigram", epochs=50, alpha0=0.01, l2=0.0001, seed=42,
                        dim=200, window=5, negative=8, embed_epochs=20, infer_epochs=20,
                        ontology=None, tagger=None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        ids: Vec<String>,
        texts: Vec<String>,
        labels: Vec<u8>,
        classifier: &str,
        mode: &str,
        features: &str,
        epochs: usize,
        alpha0: f64,
        l2: f64,
        seed: u64,
        dim: usize,
        window: usize,
        negative: usize,
        embed_epochs: usize,
        infer_epochs: usize,
        ontology: Option<&Ontology>,
        tagger: Option<&Tagger>,
    ) -> PyResult<Self> {
        let kind: pipeline::PipelineKind = classifier.parse().map_err(value_error)?;
        let mode = parse_mode(mode)?;
        let features: FeatureKind = features.parse().map_err(value_error)?;
        let config = pipeline::PipelineConfig {
            kind,
            mode,
            features,
            train: learn::TrainConfig {
                epochs,
                alpha0,
                l2,
                seed,
                ..learn::TrainConfig::default()
            },
            embedding: embed::EmbeddingConfig {
                dim,
                window,
                negative,
                epochs: embed_epochs,
                seed,
                ..embed::EmbeddingConfig::default()
            },
            infer_epochs,
        };
        let dataset = dataset_from_lists(ids, texts, Some(labels))?;
        let starter;
        let ont = match ontology {
            Some(o) => &o.inner,
            None => {
                starter = ontology::Ontology::starter();
                starter
            }
        };
        let default_tagger;
        let tag_model = match tagger {
            Some(t) => &t.inner,
            None => {
                default_tagger = postag::TaggerModel::default_model();
                default_tagger
            }
        };
        Ok(Pipeline {
            inner: pipeline::train_pipeline(&dataset, ont, tag_model, &config).map_err(value_error)?,
        })
    }

    /// Scores for parallel id/text lists: margins for bag-of-symbols
    /// models, probabilities for embedding models.
    fn score(&self, ids: Vec<String>, texts: Vec<String>) -> PyResult<Vec<f64>> {
        let dataset = dataset_from_lists(ids, texts, None)?;
        self.inner.score_dataset(&dataset).map_err(value_error)
    }

    /// 0/1 predictions for parallel id/text lists.
    fn predict(&self, ids: Vec<String>, texts: Vec<String>) -> PyResult<Vec<i64>> {
        let dataset = dataset_from_lists(ids, texts, None)?;
        Ok(self
            .inner
            .predict_dataset(&dataset)
            .map_err(value_error)?
            .into_iter()
            .map(i64::from)
            .collect())
    }

    #[getter]
    fn classifier(&self) -> String {
        self.inner.config.kind.to_string()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.config.mode.to_string()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(io_error)
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Pipeline { inner: pipeline::TrainedPipeline::from_json_str(json).map_err(value_error)? })
    }
}

fn metrics_to_dict<'py>(py: Python<'py>, m: &eval::Metrics) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("tp", m.tp)?;
    out.set_item("fp", m.fp)?;
    out.set_item("fn", m.fn_)?;
    out.set_item("tn", m.tn)?;
    out.set_item("precision", m.precision)?;
    out.set_item("recall", m.recall)?;
    out.set_item("f1", m.f1)?;
    Ok(out)
}

fn summary_to_dict<'py>(py: Python<'py>, s: &eval::MetricsSummary) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("precision", s.precision)?;
    out.set_item("recall", s.recall)?;
    out.set_item("f1", s.f1)?;
    Ok(out)
}

/// Precision, recall, F1, and the confusion counts for 0/1 predictions.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, predictions: Vec<u8>, labels: Vec<u8>) -> PyResult<Bound<'py, PyDict>> {
    let m = eval::metrics(&predictions, &labels).map_err(value_error)?;
    metrics_to_dict(py, &m)
}

/// Shuffled fold index lists; larger folds come first when `n % k != 0`.
#[pyfunction]
fn kfold_indices(n: usize, k: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    eval::kfold_indices(n, k, seed).map_err(value_error)
}

/// Precision-recall curve over score thresholds, with its area.
#[pyfunction]
fn pr_curve<'py>(py: Python<'py>, scores: Vec<f64>, labels: Vec<u8>) -> PyResult<Bound<'py, PyDict>> {
    let curve = eval::pr_curve(&scores, &labels).map_err(value_error)?;
    let points = PyList::empty(py);
    for point in &curve.points {
        points.append((point.threshold, point.precision, point.recall))?;
    }
    let out = PyDict::new(py);
    out.set_item("points", points)?;
    out.set_item("auc", curve.auc)?;
    Ok(out)
}

/// Mean and sample variance of per-dataset metrics.
///
/// Takes `(name, precision, recall, f1)` tuples; the variance entry is
/// None for a single dataset.
#[pyfunction]
fn generalization_report<'py>(
    py: Python<'py>,
    per_dataset: Vec<(String, f64, f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let entries: Vec<eval::DatasetMetrics> = per_dataset
        .into_iter()
        .map(|(name, precision, recall, f1)| eval::DatasetMetrics {
            name,
            metrics: eval::Metrics { tp: 0, fp: 0, fn_: 0, tn: 0, precision, recall, f1 },
        })
        .collect();
    let report = eval::generalization_report(entries).map_err(value_error)?;
    let datasets = PyList::empty(py);
    for entry in &report.per_dataset {
        let row = PyDict::new(py);
        row.set_item("name", &entry.name)?;
        row.set_item("metrics", metrics_to_dict(py, &entry.metrics)?)?;
        datasets.append(row)?;
    }
    let out = PyDict::new(py);
    out.set_item("per_dataset", datasets)?;
    out.set_item("mean", summary_to_dict(py, &report.mean)?)?;
    match &report.variance {
        Some(variance) => out.set_item("variance", summary_to_dict(py, variance)?)?,
        None => out.set_item("variance", py.None())?,
    }
    Ok(out)
}

#[pymodule]
fn cnf_epi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Ontology>()?;
    m.add_class::<Tagger>()?;
    m.add_class::<Embedding>()?;
    m.add_class::<LinearClassifier>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(transform_text, m)?)?;
    m.add_function(wrap_pyfunction!(to_cnf, m)?)?;
    m.add_function(wrap_pyfunction!(to_cnf_pos, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_indices, m)?)?;
    m.add_function(wrap_pyfunction!(pr_curve, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_report, m)?)?;
    m.add("OOV_SYMBOL", ontology::OOV_SYMBOL)?;
    Ok(())
}
