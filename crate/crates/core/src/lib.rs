//! Concept-normal-form (CNF) text pipeline for epidemic surveillance corpora.
//!
//! Short public messages about disease ("got the flu again, third time this
//! year") are noisy, sparse, and full of surface variation that defeats plain
//! bag-of-words models. This crate normalizes such texts into a *concept
//! normal form*: every token is replaced by the name of the ontology concept
//! it belongs to, and tokens outside the ontology are either collapsed to a
//! single out-of-vocabulary sentinel or padded with their part-of-speech tag.
//! The resulting symbol streams feed sparse n-gram classifiers and
//! document-embedding classifiers whose cross-dataset generalization can be
//! measured with the evaluation tools in [`eval`].
//!
//! Module map:
//!
//! * [`textnorm`] — lowercasing, punctuation stripping, tokenization.
//! * [`ontology`] — concept ontology format, loading, symbol tables.
//! * [`postag`] — tag set, special-token rules, averaged-perceptron tagger.
//! * [`cnf`] — token streams to concept-normal-form documents.
//! * [`vectorize`] — unigram / unigram+bigram count features over symbols.
//! * [`embed`] — document embeddings (distributed-memory training with
//!   negative sampling) over symbol streams.
//! * [`learn`] — linear classifiers trained with SGD (hinge or logistic).
//! * [`eval`] — precision/recall/F1, k-fold splits, cross-dataset reports,
//!   precision-recall curves, experiment orchestration.
//! * [`corpus`] — labeled JSONL corpora, dedup, splits.
//! * [`pipeline`] — end-to-end trainable classification pipelines.
//! * [`synth`] — synthetic corpus generators used by tests and demos.
//! * [`cli`] — the `cnf-epi` command-line interface.

pub mod cli;
pub mod cnf;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod learn;
mod numeric;
pub mod ontology;
pub mod pipeline;
pub mod postag;
pub mod synth;
pub mod textnorm;
pub mod vectorize;
