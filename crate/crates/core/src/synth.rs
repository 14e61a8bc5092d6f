//! Synthetic corpora with controlled vocabulary overlap.
//!
//! [`synthetic_disease_corpus`] builds two parallel worlds of short
//! illness chatter. Both variants express the same concepts — positives
//! are first-person reports of being ill, negatives are impersonal
//! health chatter — but variant A draws every surface word from the
//! even-indexed entries of each starter-ontology concept and variant B
//! from the odd-indexed entries, with disjoint disease names on top. The
//! two variants therefore share not a single surface token, while their
//! concept-normal forms are drawn from the same distribution. That makes
//! them a sharp probe of cross-vocabulary generalization: a classifier
//! over raw tokens trained on A sees nothing it knows in B, while one
//! over concept symbols transfers unharmed.
//!
//! [`synthetic_cnf_corpus`] builds documents directly at the symbol
//! level, shaped like tag-padded transforms, where a noun slot is filled
//! interchangeably by `NN`, `NNS`, or `NNP` — giving those three symbols
//! near-identical context distributions for embedding sanity checks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::CnfDocument;
use crate::corpus::{Dataset, Record};
use crate::ontology::Ontology;

/// Which half of each concept's word list a corpus draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconVariant {
    /// Even-indexed words, disease names like "flu".
    A,
    /// Odd-indexed words, disease names like "norovirus".
    B,
}

impl std::fmt::Display for LexiconVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LexiconVariant::A => write!(f, "a"),
            LexiconVariant::B => write!(f, "b"),
        }
    }
}

/// Disease names per variant. None of these occur in the starter
/// ontology, so they always surface as out-of-vocabulary tokens.
const DISEASES_A: [&str; 4] = ["flu", "measles", "mumps", "smallpox"];
const DISEASES_B: [&str; 4] = ["norovirus", "listeria", "rotavirus", "cholera"];

/// One position of a message template.
#[derive(Debug, Clone, Copy)]
enum Slot {
    /// A word sampled from the variant's half of this concept.
    C(&'static str),
    /// A variant-specific disease name.
    Disease,
}

use Slot::{Disease, C};

/// First-person reports of being ill.
const POSITIVE_TEMPLATES: [&[Slot]; 5] = [
    &[C("SELF_REF"), C("HAVE"), C("DETERMINER"), Disease, C("WINDOW")],
    &[C("SELF_REF"), C("COMMENCEMENT"), Disease, C("WINDOW")],
    &[C("SELF_REF"), C("BE"), C("MORBIDITY"), C("PREPOSITION"), Disease],
    &[C("SELF_REF"), C("BE"), C("EXTENT"), C("MORBIDITY"), C("WINDOW")],
    &[C("SELF_REF"), C("HAVE"), C("DETERMINER"), C("MORBIDITY"), C("WINDOW")],
];

/// Impersonal health chatter mentioning the same diseases.
const NEGATIVE_TEMPLATES: [&[Slot]; 5] = [
    &[C("GOVERNMENT"), C("INCREMENT"), C("PREPOSITION"), Disease, C("TREATMENT")],
    &[C("CARE_PROVIDER"), C("TREATMENT"), C("PREPOSITION"), Disease],
    &[C("PATHOGEN"), C("INCREMENT"), C("PREPOSITION"), C("LOCALITY")],
    &[C("PERSON"), C("TREATMENT"), C("PREPOSITION"), C("DETERMINER"), Disease],
    &[C("GOVERNMENT"), C("TREATMENT"), C("PREPOSITION"), C("PERSON"), C("WINDOW")],
];

/// The variant's half of a concept's word list.
fn half_words(ontology: &Ontology, name: &str, variant: LexiconVariant) -> Vec<String> {
    let concept = ontology
        .concepts()
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("template concept {name} missing from starter ontology"));
    let words = &concept.words;
    let skip = match variant {
        LexiconVariant::A => 0,
        LexiconVariant::B => 1,
    };
    let half: Vec<String> = words.iter().skip(skip).step_by(2).cloned().collect();
    assert!(
        !half.is_empty(),
        "concept {name} needs at least two words to split between variants"
    );
    half
}

/// Generate a labeled synthetic corpus of `n` records, a seeded
/// `positive_fraction` of which (rounded) are first-person illness
/// reports. Record order is shuffled, ids are `<variant>-<index>`, and
/// every record carries the dataset tag `synthetic-<variant>`.
pub fn synthetic_disease_corpus(
    variant: LexiconVariant,
    n: usize,
    positive_fraction: f64,
    seed: u64,
) -> Dataset {
    assert!(
        (0.0..=1.0).contains(&positive_fraction),
        "positive_fraction must lie in [0, 1]"
    );
    let ontology = Ontology::starter();
    let diseases: &[&str] = match variant {
        LexiconVariant::A => &DISEASES_A,
        LexiconVariant::B => &DISEASES_B,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = ((positive_fraction * n as f64).round() as usize).min(n);
    let mut labels: Vec<u8> = std::iter::repeat_n(1u8, n_pos)
        .chain(std::iter::repeat_n(0u8, n - n_pos))
        .collect();
    use rand::seq::SliceRandom;
    labels.shuffle(&mut rng);

    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let templates: &[&[Slot]] = if label == 1 {
                &POSITIVE_TEMPLATES
            } else {
                &NEGATIVE_TEMPLATES
            };
            let template = *templates.choose(&mut rng).expect("templates are non-empty");
            let words: Vec<String> = template
                .iter()
                .map(|slot| match slot {
                    C(name) => {
                        let half = half_words(ontology, name, variant);
                        half[rng.random_range(0..half.len())].clone()
                    }
                    Disease => diseases[rng.random_range(0..diseases.len())].to_string(),
                })
                .collect();
            Record {
                id: format!("{variant}-{i}"),
                text: words.join(" "),
                label: Some(label),
                dataset: Some(format!("synthetic-{variant}")),
            }
        })
        .collect();
    Dataset::new(format!("synthetic-{variant}"), records)
}

/// Symbol-level templates shaped like tag-padded transforms. `NOUN`
/// marks the interchangeable noun slot.
const CNF_TEMPLATES: [&[&str]; 6] = [
    &["SELF_REF", "HAVE", "DETERMINER", "NOUN", "WINDOW"],
    &["NOUN", "BE", "EXTENT", "MORBIDITY"],
    &["NOUN", "VBZ", "PREPOSITION", "NOUN"],
    &["SELF_REF", "VBD", "DETERMINER", "NOUN"],
    &["NOUN", "MD", "VB", "PREPOSITION", "NOUN"],
    &["DETERMINER", "JJ", "NOUN", "BE", "RB", "MORBIDITY"],
];

const NOUN_FILLERS: [&str; 3] = ["NN", "NNS", "NNP"];

/// Generate `n` symbol-level documents where the three noun tags fill
/// the same slots interchangeably, so their learned vectors should end
/// up close together.
pub fn synthetic_cnf_corpus(n: usize, seed: u64) -> Vec<CnfDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let template = *CNF_TEMPLATES.choose(&mut rng).expect("templates are non-empty");
            let symbols = template
                .iter()
                .map(|&s| {
                    if s == "NOUN" {
                        NOUN_FILLERS[rng.random_range(0..NOUN_FILLERS.len())].to_string()
                    } else {
                        s.to_string()
                    }
                })
                .collect();
            CnfDocument {
                source_id: format!("s{i}"),
                symbols,
                label: None,
                dataset: None,
            }
        })
        .collect()
}
