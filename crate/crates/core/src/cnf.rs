//! Concept normal form: mapping token sequences onto ontology symbols.
//!
//! Every token either names a concept from the ontology or it does not.
//! Known tokens are replaced by their concept name. Unknown tokens are
//! replaced by the `OOV` sentinel in plain mode, or by their
//! part-of-speech tag in padded mode. The output therefore draws from a
//! small closed symbol set, which is what makes classifiers trained on
//! one disease corpus transfer to another: surface vocabulary differences
//! collapse onto shared concepts.
//!
//! ```
//! use cnf_epi::cnf::{to_cnf, to_cnf_pos, CnfMode};
//! use cnf_epi::ontology::Ontology;
//! use cnf_epi::postag::{tag, TaggerModel};
//! use cnf_epi::textnorm::normalize_tokenize;
//!
//! let ontology = Ontology::starter();
//! let tokens = normalize_tokenize("I have never had the flu!");
//! let plain = to_cnf(&tokens, ontology, "t1");
//! assert_eq!(plain.symbols.join(" "), "SELF_REF HAVE FREQUENCY HAVE THE OOV");
//!
//! let tags = tag(&tokens, TaggerModel::default_model());
//! let padded = to_cnf_pos(&tokens, &tags, ontology, "t1").unwrap();
//! assert_eq!(padded.symbols.join(" "), "SELF_REF HAVE FREQUENCY HAVE THE NN");
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::ontology::{Ontology, OOV_SYMBOL};
use crate::postag::{tag, TaggerModel};
use crate::textnorm::{normalize_tokenize, Token};

/// How unknown tokens are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CnfMode {
    /// Unknown tokens become the `OOV` sentinel.
    PlainOov,
    /// Unknown tokens become their part-of-speech tag.
    PosPadded,
}

impl std::fmt::Display for CnfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CnfMode::PlainOov => write!(f, "plain-oov"),
            CnfMode::PosPadded => write!(f, "pos-padded"),
        }
    }
}

impl std::str::FromStr for CnfMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain-oov" => Ok(CnfMode::PlainOov),
            "pos-padded" => Ok(CnfMode::PosPadded),
            other => Err(format!(
                "unknown mode {other:?}; expected plain-oov or pos-padded"
            )),
        }
    }
}

/// A document rewritten as ontology symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfDocument {
    /// Id of the source record.
    #[serde(rename = "id")]
    pub source_id: String,
    pub symbols: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("record {id:?}: {tokens} tokens but {tags} tags")]
    LengthMismatch { id: String, tokens: usize, tags: usize },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Rewrite tokens as concept symbols, using `OOV` for unknown tokens.
pub fn to_cnf(tokens: &[Token], ontology: &Ontology, id: &str) -> CnfDocument {
    let symbols = tokens
        .iter()
        .map(|t| match ontology.lookup(&t.surface) {
            Some(cid) => ontology.concept(cid).name.clone(),
            None => OOV_SYMBOL.to_string(),
        })
        .collect();
    CnfDocument {
        source_id: id.to_string(),
        symbols,
        label: None,
        dataset: None,
    }
}

/// Rewrite tokens as concept symbols, using the token's part-of-speech
/// tag for unknown tokens. `tags` must be parallel to `tokens`.
pub fn to_cnf_pos(
    tokens: &[Token],
    tags: &[String],
    ontology: &Ontology,
    id: &str,
) -> Result<CnfDocument, CnfError> {
    if tokens.len() != tags.len() {
        return Err(CnfError::LengthMismatch {
            id: id.to_string(),
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let symbols = tokens
        .iter()
        .zip(tags)
        .map(|(t, pos)| match ontology.lookup(&t.surface) {
            Some(cid) => ontology.concept(cid).name.clone(),
            None => pos.clone(),
        })
        .collect();
    Ok(CnfDocument {
        source_id: id.to_string(),
        symbols,
        label: None,
        dataset: None,
    })
}

/// Normalize, tokenize, and rewrite one text.
pub fn transform_text(
    text: &str,
    ontology: &Ontology,
    tagger: &TaggerModel,
    mode: CnfMode,
    id: &str,
) -> CnfDocument {
    let tokens = normalize_tokenize(text);
    match mode {
        CnfMode::PlainOov => to_cnf(&tokens, ontology, id),
        CnfMode::PosPadded => {
            let tags = tag(&tokens, tagger);
            to_cnf_pos(&tokens, &tags, ontology, id)
                .expect("tagger returns one tag per token")
        }
    }
}

/// Rewrite one corpus record, carrying its label and dataset tag.
pub fn transform_record(
    record: &crate::corpus::Record,
    ontology: &Ontology,
    tagger: &TaggerModel,
    mode: CnfMode,
) -> CnfDocument {
    let mut doc = transform_text(&record.text, ontology, tagger, mode, &record.id);
    doc.label = record.label;
    doc.dataset = record.dataset.clone();
    doc
}

/// Rewrite every record of a dataset, carrying labels and dataset tags.
pub fn transform_corpus(
    dataset: &Dataset,
    ontology: &Ontology,
    tagger: &TaggerModel,
    mode: CnfMode,
) -> Vec<CnfDocument> {
    dataset
        .records
        .iter()
        .map(|record| transform_record(record, ontology, tagger, mode))
        .collect()
}

/// Read transformed documents from JSONL.
pub fn read_cnf(reader: impl BufRead) -> Result<Vec<CnfDocument>, CnfError> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CnfError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CnfDocument =
            serde_json::from_str(&line).map_err(|e| CnfError::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Write transformed documents as JSONL.
pub fn write_cnf(docs: &[CnfDocument], mut writer: impl Write) -> Result<(), CnfError> {
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| CnfError::Io(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| CnfError::Io(e.to_string()))?;
    }
    Ok(())
}
