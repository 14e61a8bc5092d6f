//! End-to-end classification pipelines and experiment orchestration.
//!
//! A [`TrainedPipeline`] bundles everything needed to score raw text:
//! the ontology, the part-of-speech tagger, the fitted representation
//! (bag-of-n-grams feature space or document embedding), and the linear
//! classifier on top. Saved pipelines are single self-contained JSON
//! files; the classifier records a fingerprint of the representation it
//! was trained on, and scoring refuses to proceed when they disagree.
//!
//! Representation fitting is unsupervised and happens once per training
//! corpus. Cross-validation therefore varies only the supervised head:
//! folds retrain the linear classifier, while the feature space or
//! embedding stays fixed. Fold predictions are pooled and scored as one
//! set, and the resulting report says so.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{transform_corpus, transform_text, CnfError, CnfMode};
use crate::corpus::{CorpusError, Dataset};
use crate::embed::{train_embeddings, EmbedError, Embedding, EmbeddingConfig};
use crate::eval::{
    generalization_report, kfold_indices, metrics, pr_curve, DatasetMetrics, EvalError,
    GeneralizationReport, Metrics, PrCurve,
};
use crate::learn::{train, FeatureRow, LearnError, LinearModel, Loss, TrainConfig};
use crate::ontology::{Ontology, OntologyError};
use crate::postag::{TagError, TaggerModel};
use crate::vectorize::{FeatureKind, FeatureSpace};

/// Format version written into saved pipelines.
pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("ontology: {0}")]
    Ontology(#[from] OntologyError),
    #[error("tagger: {0}")]
    Tag(#[from] TagError),
    #[error("transform: {0}")]
    Cnf(#[from] CnfError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("embedding: {0}")]
    Embed(#[from] EmbedError),
    #[error("classifier: {0}")]
    Learn(#[from] LearnError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error(
        "classifier was trained on a different representation \
         (fingerprint {expected:#018x}, found {got:#018x})"
    )]
    FingerprintMismatch { expected: u64, got: u64 },
    #[error("serialization error: {0}")]
    Serde(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Which classifier family a pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    /// Sparse n-gram counts into a hinge-loss linear classifier.
    BowSgd,
    /// Document embeddings into a logistic-loss linear classifier.
    Doc2vecLogreg,
}

impl PipelineKind {
    /// The loss each family trains with.
    pub fn loss(self) -> Loss {
        match self {
            PipelineKind::BowSgd => Loss::Hinge,
            PipelineKind::Doc2vecLogreg => Loss::Logistic,
        }
    }
}

impl std::fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineKind::BowSgd => write!(f, "bow-sgd"),
            PipelineKind::Doc2vecLogreg => write!(f, "doc2vec-logreg"),
        }
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bow-sgd" => Ok(PipelineKind::BowSgd),
            "doc2vec-logreg" => Ok(PipelineKind::Doc2vecLogreg),
            other => Err(format!(
                "unknown classifier {other:?}; expected bow-sgd or doc2vec-logreg"
            )),
        }
    }
}

/// Everything configurable about a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub mode: CnfMode,
    /// N-gram orders; used by [`PipelineKind::BowSgd`].
    pub features: FeatureKind,
    /// Linear-classifier training.
    pub train: TrainConfig,
    /// Embedding training; used by [`PipelineKind::Doc2vecLogreg`].
    pub embedding: EmbeddingConfig,
    /// Passes used to embed documents unseen at training time.
    pub infer_epochs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: PipelineKind::BowSgd,
            mode: CnfMode::PlainOov,
            features: FeatureKind::Unigram,
            train: TrainConfig::default(),
            embedding: EmbeddingConfig::default(),
            infer_epochs: 20,
        }
    }
}

/// The fitted representation plus its classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Backend {
    Bow {
        space: FeatureSpace,
        model: LinearModel,
    },
    Doc2vec {
        embedding: Embedding,
        model: LinearModel,
    },
}

/// A fully trained, self-contained scoring pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub version: u32,
    pub config: PipelineConfig,
    /// The ontology in its native text format.
    pub ontology: String,
    pub tagger: TaggerModel,
    pub backend: Backend,
}

impl TrainedPipeline {
    pub fn parse_ontology(&self) -> Result<Ontology, PipelineError> {
        Ok(Ontology::parse(&self.ontology)?)
    }

    pub fn to_json_string(&self) -> Result<String, PipelineError> {
        serde_json::to_string(self).map_err(|e| PipelineError::Serde(e.to_string()))
    }

    pub fn from_json_str(json: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(json).map_err(|e| PipelineError::Serde(e.to_string()))
    }

    pub fn save(&self, mut writer: impl Write) -> Result<(), PipelineError> {
        let json = self.to_json_string()?;
        writer
            .write_all(json.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|e| PipelineError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let mut json = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut json))
            .map_err(|e| PipelineError::Io(e.to_string()))?;
        Self::from_json_str(&json)
    }

    fn check_fingerprint(&self) -> Result<(), PipelineError> {
        let (expected, got) = match &self.backend {
            Backend::Bow { space, model } => (space.fingerprint(), model.fingerprint),
            Backend::Doc2vec { embedding, model } => (embedding.fingerprint(), model.fingerprint),
        };
        if expected != got {
            return Err(PipelineError::FingerprintMismatch { expected, got });
        }
        Ok(())
    }

    /// Ranking score per record: the margin for hinge models, the
    /// positive-class probability for logistic models. Both orderings
    /// agree with [`TrainedPipeline::predict_dataset`].
    pub fn score_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>, PipelineError> {
        self.check_fingerprint()?;
        let ontology = self.parse_ontology()?;
        let mut scores = Vec::with_capacity(dataset.len());
        match &self.backend {
            Backend::Bow { space, model } => {
                for record in &dataset.records {
                    let doc = transform_text(
                        &record.text,
                        &ontology,
                        &self.tagger,
                        self.config.mode,
                        &record.id,
                    );
                    scores.push(model.score(&space.transform(&doc))?);
                }
            }
            Backend::Doc2vec { embedding, model } => {
                let by_id: HashMap<&str, usize> = embedding
                    .doc_ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.as_str(), i))
                    .collect();
                for record in &dataset.records {
                    let doc = transform_text(
                        &record.text,
                        &ontology,
                        &self.tagger,
                        self.config.mode,
                        &record.id,
                    );
                    let row: Vec<f64> = match by_id.get(record.id.as_str()) {
                        Some(&i) => embedding.doc_vector(i).to_vec(),
                        None => embedding.infer_doc(
                            &doc.symbols,
                            self.config.infer_epochs,
                            self.config.embedding.seed,
                        ),
                    };
                    scores.push(model.predict_proba(&row)?);
                }
            }
        }
        Ok(scores)
    }

    /// Class decisions per record.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<u8>, PipelineError> {
        let cutoff = match self.config.kind {
            PipelineKind::BowSgd => 0.0,
            PipelineKind::Doc2vecLogreg => 0.5,
        };
        Ok(self
            .score_dataset(dataset)?
            .into_iter()
            .map(|s| u8::from(s > cutoff))
            .collect())
    }
}

/// Train a pipeline on a fully labeled dataset.
pub fn train_pipeline(
    train_set: &Dataset,
    ontology: &Ontology,
    tagger: &TaggerModel,
    config: &PipelineConfig,
) -> Result<TrainedPipeline, PipelineError> {
    let labels = train_set.labels()?;
    let docs = transform_corpus(train_set, ontology, tagger, config.mode);
    let backend = match config.kind {
        PipelineKind::BowSgd => {
            let space = FeatureSpace::fit(&docs, config.features);
            let rows = space.transform_all(&docs);
            let model = train(&rows, &labels, config.kind.loss(), &config.train)?
                .with_fingerprint(space.fingerprint());
            Backend::Bow { space, model }
        }
        PipelineKind::Doc2vecLogreg => {
            let embedding = train_embeddings(&docs, &config.embedding)?;
            let rows: Vec<Vec<f64>> = (0..embedding.doc_count())
                .map(|i| embedding.doc_vector(i).to_vec())
                .collect();
            let model = train(&rows, &labels, config.kind.loss(), &config.train)?
                .with_fingerprint(embedding.fingerprint());
            Backend::Doc2vec { embedding, model }
        }
    };
    Ok(TrainedPipeline {
        version: PIPELINE_VERSION,
        config: config.clone(),
        ontology: ontology.to_text(),
        tagger: tagger.clone(),
        backend,
    })
}

/// Pooled k-fold cross-validation summary on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    /// Metrics over the pooled out-of-fold predictions.
    pub metrics: Metrics,
}

/// A named precision-recall curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub dataset: String,
    pub curve: PrCurve,
}

/// Everything one experiment run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub classifier: PipelineKind,
    pub mode: CnfMode,
    pub features: Option<FeatureKind>,
    pub cv: Option<CvSummary>,
    pub generalization: GeneralizationReport,
    pub curves: Vec<NamedCurve>,
}

/// Cross-validate the supervised head on the training corpus.
///
/// The representation (feature space or embedding) comes from the
/// already-trained pipeline; each fold retrains only the linear
/// classifier on the complement and predicts the held-out fold. All
/// out-of-fold predictions are pooled and scored once.
pub fn cross_validate(
    pipeline: &TrainedPipeline,
    train_set: &Dataset,
    folds: usize,
) -> Result<CvSummary, PipelineError> {
    let labels = train_set.labels()?;
    let ontology = pipeline.parse_ontology()?;
    let docs = transform_corpus(train_set, &ontology, &pipeline.tagger, pipeline.config.mode);
    let n = docs.len();
    let assignment = kfold_indices(n, folds, pipeline.config.train.seed)?;

    let mut pooled: Vec<u8> = vec![0; n];
    match &pipeline.backend {
        Backend::Bow { space, .. } => {
            let rows = space.transform_all(&docs);
            run_folds(&rows, &labels, &assignment, pipeline, &mut pooled)?;
        }
        Backend::Doc2vec { embedding, .. } => {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| embedding.doc_vector(i).to_vec())
                .collect();
            run_folds(&rows, &labels, &assignment, pipeline, &mut pooled)?;
        }
    }
    Ok(CvSummary {
        folds,
        metrics: metrics(&pooled, &labels)?,
    })
}

fn run_folds<R: FeatureRow + Clone>(
    rows: &[R],
    labels: &[u8],
    assignment: &[Vec<usize>],
    pipeline: &TrainedPipeline,
    pooled: &mut [u8],
) -> Result<(), PipelineError> {
    for fold in assignment {
        let held: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let mut fold_rows = Vec::with_capacity(rows.len() - fold.len());
        let mut fold_labels = Vec::with_capacity(rows.len() - fold.len());
        for (i, row) in rows.iter().enumerate() {
            if !held.contains(&i) {
                fold_rows.push(row.clone());
                fold_labels.push(labels[i]);
            }
        }
        let model = train(
            &fold_rows,
            &fold_labels,
            pipeline.config.kind.loss(),
            &pipeline.config.train,
        )?;
        for &i in fold {
            pooled[i] = model.predict(&rows[i])?;
        }
    }
    Ok(())
}

/// Evaluate a trained pipeline on labeled datasets: per-dataset metrics
/// with cross-dataset mean and variance, plus one precision-recall
/// curve per dataset.
pub fn run_experiment_with(
    pipeline: &TrainedPipeline,
    eval_sets: &[Dataset],
    cv: Option<(&Dataset, usize)>,
) -> Result<ExperimentReport, PipelineError> {
    let cv = match cv {
        Some((train_set, folds)) => Some(cross_validate(pipeline, train_set, folds)?),
        None => None,
    };
    let mut per_dataset = Vec::with_capacity(eval_sets.len());
    let mut curves = Vec::with_capacity(eval_sets.len());
    for dataset in eval_sets {
        let labels = dataset.labels()?;
        let predictions = pipeline.predict_dataset(dataset)?;
        per_dataset.push(DatasetMetrics {
            name: dataset.name.clone(),
            metrics: metrics(&predictions, &labels)?,
        });
        let scores = pipeline.score_dataset(dataset)?;
        curves.push(NamedCurve {
            dataset: dataset.name.clone(),
            curve: pr_curve(&scores, &labels)?,
        });
    }
    Ok(ExperimentReport {
        classifier: pipeline.config.kind,
        mode: pipeline.config.mode,
        features: match pipeline.config.kind {
            PipelineKind::BowSgd => Some(pipeline.config.features),
            PipelineKind::Doc2vecLogreg => None,
        },
        cv,
        generalization: generalization_report(per_dataset)?,
        curves,
    })
}

/// Train on one dataset, then evaluate: optional pooled k-fold
/// cross-validation on the training set, and full metrics on every
/// evaluation set.
pub fn run_experiment(
    train_set: &Dataset,
    eval_sets: &[Dataset],
    ontology: &Ontology,
    tagger: &TaggerModel,
    config: &PipelineConfig,
    cv_folds: Option<usize>,
) -> Result<(TrainedPipeline, ExperimentReport), PipelineError> {
    let pipeline = train_pipeline(train_set, ontology, tagger, config)?;
    let report = run_experiment_with(
        &pipeline,
        eval_sets,
        cv_folds.map(|k| (train_set, k)),
    )?;
    Ok((pipeline, report))
}
