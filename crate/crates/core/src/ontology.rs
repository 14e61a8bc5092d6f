//! Concept ontology: named concepts, their surface dictionaries, and the
//! symbol table that fixes the vocabulary of concept-normal-form documents.
//!
//! # File format
//!
//! One concept per line:
//!
//! ```text
//! # disease-language ontology
//! SELF_REF<TAB>i,we,us
//! HAVE<TAB>have,had,has
//! PATIENT:PERSON<TAB>patient,patients
//! ```
//!
//! * The line starts with the concept name — an uppercase identifier over
//!   `A-Z`, `0-9` and `_` — optionally followed by `:PARENT` naming an
//!   already-defined concept, then a single tab, then a comma-separated,
//!   non-empty list of lowercase words.
//! * `#` at the start of a (possibly indented) line begins a comment.
//! * Blank lines and trailing whitespace are ignored. Lines are LF-separated.
//!
//! Every word belongs to exactly one concept: a word repeated anywhere in
//! the file is a hard error, because silently resolving the collision would
//! make transforms depend on file order. Polysemous words get their own
//! single-word concept instead.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::sync::OnceLock;

use thiserror::Error;

use crate::postag::TagSet;

/// Sentinel symbol for tokens outside the ontology (plain mode only).
pub const OOV_SYMBOL: &str = "OOV";

/// Dense index of a concept within its ontology (file order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(pub usize);

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A named concept and the surface words that map to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub name: String,
    pub words: Vec<String>,
    pub parent: Option<ConceptId>,
}

/// An ordered set of concepts with a global word-to-concept index.
#[derive(Debug, Clone)]
pub struct Ontology {
    concepts: Vec<Concept>,
    word_index: HashMap<String, ConceptId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OntologyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: concept {name:?} is defined twice")]
    DuplicateConcept { line: usize, name: String },
    #[error("word {word:?} belongs to both {first:?} and {second:?}")]
    DuplicateWord {
        word: String,
        first: String,
        second: String,
    },
    #[error("ontology defines no concepts")]
    EmptyOntology,
    #[error("symbol {name:?} would appear twice in the symbol table")]
    NameCollision { name: String },
    #[error("i/o error reading ontology: {0}")]
    Io(String),
}

fn is_valid_concept_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

fn is_valid_word(word: &str) -> bool {
    !word.is_empty()
        && !word.chars().any(char::is_whitespace)
        && word == word.to_lowercase()
}

impl Ontology {
    /// Parse an ontology from a reader in the native line format.
    pub fn load(reader: impl BufRead) -> Result<Self, OntologyError> {
        let mut concepts: Vec<Concept> = Vec::new();
        let mut by_name: HashMap<String, ConceptId> = HashMap::new();
        let mut word_index: HashMap<String, ConceptId> = HashMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| OntologyError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, rest) = line.split_once('\t').ok_or_else(|| OntologyError::Syntax {
                line: line_no,
                message: "expected `NAME<TAB>word,word,...`".to_string(),
            })?;

            let (name, parent_name) = match head.split_once(':') {
                Some((n, p)) => (n, Some(p)),
                None => (head, None),
            };
            if !is_valid_concept_name(name) {
                return Err(OntologyError::Syntax {
                    line: line_no,
                    message: format!(
                        "invalid concept name {name:?} (expected uppercase A-Z, 0-9, _)"
                    ),
                });
            }
            let parent = match parent_name {
                None => None,
                Some(p) => {
                    if !is_valid_concept_name(p) {
                        return Err(OntologyError::Syntax {
                            line: line_no,
                            message: format!("invalid parent name {p:?}"),
                        });
                    }
                    match by_name.get(p) {
                        Some(&id) => Some(id),
                        None => {
                            return Err(OntologyError::Syntax {
                                line: line_no,
                                message: format!("parent {p:?} is not defined above this line"),
                            })
                        }
                    }
                }
            };
            if by_name.contains_key(name) {
                return Err(OntologyError::DuplicateConcept {
                    line: line_no,
                    name: name.to_string(),
                });
            }

            let id = ConceptId(concepts.len());
            let mut words = Vec::new();
            for word in rest.split(',') {
                let word = word.trim();
                if !is_valid_word(word) {
                    return Err(OntologyError::Syntax {
                        line: line_no,
                        message: format!(
                            "invalid word {word:?} (words are non-empty, lowercase, no whitespace)"
                        ),
                    });
                }
                if let Some(&owner) = word_index.get(word) {
                    let first = if owner == id {
                        name.to_string()
                    } else {
                        concepts[owner.0].name.clone()
                    };
                    return Err(OntologyError::DuplicateWord {
                        word: word.to_string(),
                        first,
                        second: name.to_string(),
                    });
                }
                word_index.insert(word.to_string(), id);
                words.push(word.to_string());
            }

            by_name.insert(name.to_string(), id);
            concepts.push(Concept {
                name: name.to_string(),
                words,
                parent,
            });
        }

        if concepts.is_empty() {
            return Err(OntologyError::EmptyOntology);
        }
        Ok(Ontology {
            concepts,
            word_index,
        })
    }

    /// Parse an ontology from an in-memory string.
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        Self::load(text.as_bytes())
    }

    /// The starter ontology bundled with the crate.
    pub fn starter() -> &'static Ontology {
        static STARTER: OnceLock<Ontology> = OnceLock::new();
        STARTER.get_or_init(|| {
            Ontology::parse(STARTER_ONTOLOGY_TEXT).expect("bundled starter ontology is valid")
        })
    }

    /// Raw text of the bundled starter ontology.
    pub fn starter_text() -> &'static str {
        STARTER_ONTOLOGY_TEXT
    }

    /// Look a normalized token up in the word index.
    pub fn lookup(&self, token: &str) -> Option<ConceptId> {
        self.word_index.get(token).copied()
    }

    /// Name of the concept a normalized token maps to, if any.
    pub fn lookup_name(&self, token: &str) -> Option<&str> {
        self.lookup(token).map(|id| self.concepts[id.0].name.as_str())
    }

    pub fn concept(&self, id: ConceptId) -> &Concept {
        &self.concepts[id.0]
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    /// Total number of dictionary words across all concepts.
    pub fn word_count(&self) -> usize {
        self.concepts.iter().map(|c| c.words.len()).sum()
    }

    /// Serialize back to the native line format (comments are not preserved).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for concept in &self.concepts {
            out.push_str(&concept.name);
            if let Some(parent) = concept.parent {
                out.push(':');
                out.push_str(&self.concepts[parent.0].name);
            }
            out.push('\t');
            out.push_str(&concept.words.join(","));
            out.push('\n');
        }
        out
    }
}

/// The fixed, ordered vocabulary of concept-normal-form documents:
/// concept names in file order, then tags in canonical tag-set order,
/// then the out-of-vocabulary sentinel last.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    pub fn oov_index(&self) -> usize {
        self.symbols.len() - 1
    }

    /// Stable fingerprint of the full ordered symbol list.
    pub fn fingerprint(&self) -> u64 {
        crate::numeric::stable_fingerprint(self.symbols.iter().map(String::as_str))
    }
}

/// Build the symbol table for an ontology and a tag set.
pub fn symbol_table(ontology: &Ontology, tags: &TagSet) -> Result<SymbolTable, OntologyError> {
    let mut symbols: Vec<String> = Vec::with_capacity(ontology.concept_count() + tags.len() + 1);
    symbols.extend(ontology.concepts().iter().map(|c| c.name.clone()));
    symbols.extend(tags.all().map(str::to_string));
    symbols.push(OOV_SYMBOL.to_string());

    let mut index = HashMap::with_capacity(symbols.len());
    for (i, sym) in symbols.iter().enumerate() {
        if index.insert(sym.clone(), i).is_some() {
            return Err(OntologyError::NameCollision { name: sym.clone() });
        }
    }
    Ok(SymbolTable { symbols, index })
}

const STARTER_ONTOLOGY_TEXT: &str = include_str!("../data/starter.ont");
