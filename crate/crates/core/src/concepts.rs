//! Concept extraction and the concept-occurrence index.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};

static STOPWORDS_ASSET: &str = include_str!("../assets/stopwords_en.txt");

/// The bundled English stopword list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_ASSET
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptUnit {
    Unigram,
    Bigram,
    Sentence,
}

impl fmt::Display for ConceptUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptUnit::Unigram => "unigram",
            ConceptUnit::Bigram => "bigram",
            ConceptUnit::Sentence => "sentence",
        })
    }
}

impl std::str::FromStr for ConceptUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unigram" => Ok(ConceptUnit::Unigram),
            "bigram" => Ok(ConceptUnit::Bigram),
            "sentence" => Ok(ConceptUnit::Sentence),
            other => Err(format!("unknown concept unit `{other}`")),
        }
    }
}

/// A normalized content unit. Two concepts are equal iff their keys are.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Concept {
    pub key: String,
    pub unit: ConceptUnit,
}

impl PartialEq for Concept {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Concept {}

impl Hash for Concept {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

/// Normalizes free text into a concept key: tokenized, lowercased, single-spaced.
pub fn normalize_key(text: &str) -> String {
    crate::corpus::tokenize(text).join(" ")
}

/// Distinct concepts of a token sequence, in first-occurrence order.
pub fn concept_keys(tokens: &[String], unit: ConceptUnit) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |key: String| {
        if seen.insert(key.clone()) {
            out.push(key);
        }
    };
    match unit {
        ConceptUnit::Unigram => tokens
            .iter()
            .filter(|t| !is_stopword(t))
            .for_each(|t| push(t.clone())),
        ConceptUnit::Bigram => tokens
            .windows(2)
            .filter(|w| !(is_stopword(&w[0]) && is_stopword(&w[1])))
            .for_each(|w| push(format!("{} {}", w[0], w[1]))),
        ConceptUnit::Sentence => {
            if !tokens.is_empty() {
                push(tokens.join(" "));
            }
        }
    }
    out
}

pub fn extract_concepts(sentence: &Sentence, unit: ConceptUnit) -> Vec<Concept> {
    concept_keys(&sentence.tokens, unit)
        .into_iter()
        .map(|key| Concept { key, unit })
        .collect()
}

/// Dense concept identifier within one [`ConceptIndex`].
pub type ConceptId = usize;

/// Occurrence index of every concept in a corpus for one unit.
///
/// Concepts are interned in ascending key order, so ids are stable for a
/// given corpus and unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptIndex {
    unit: ConceptUnit,
    keys: Vec<String>,
    lookup: HashMap<String, ConceptId>,
    occurrences: Vec<Vec<usize>>,
    doc_frequency: Vec<usize>,
    by_sentence: Vec<Vec<ConceptId>>,
    lengths: Vec<usize>,
    num_documents: usize,
}

impl ConceptIndex {
    pub fn build(corpus: &Corpus, unit: ConceptUnit) -> Self {
        let mut occ: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut docs: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut sentence_keys = Vec::with_capacity(corpus.num_sentences());
        let lengths = corpus.sentences().map(|s| s.length_words).collect();
        for (d, doc) in corpus.documents.iter().enumerate() {
            for s in &doc.sentences {
                let keys = concept_keys(&s.tokens, unit);
                for k in &keys {
                    occ.entry(k.clone()).or_default().insert(s.sent_id);
                    docs.entry(k.clone()).or_default().insert(d);
                }
                sentence_keys.push(keys);
            }
        }
        let keys: Vec<String> = occ.keys().cloned().collect();
        let lookup: HashMap<String, ConceptId> =
            keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let occurrences = occ.into_values().map(|s| s.into_iter().collect()).collect();
        let doc_frequency = docs.into_values().map(|s| s.len()).collect();
        let by_sentence = sentence_keys
            .into_iter()
            .map(|ks| {
                let mut ids: Vec<ConceptId> = ks.iter().map(|k| lookup[k]).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        ConceptIndex {
            unit,
            keys,
            lookup,
            occurrences,
            doc_frequency,
            by_sentence,
            lengths,
            num_documents: corpus.num_documents(),
        }
    }

    /// Builds an index directly from per-sentence `(length, concept keys)`,
    /// treating all sentences as one document. Used for synthetic solver
    /// instances that have no underlying text.
    pub fn from_sentences(unit: ConceptUnit, sentences: Vec<(usize, Vec<String>)>) -> Self {
        let mut occ: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (sid, (_, keys)) in sentences.iter().enumerate() {
            for k in keys {
                occ.entry(k.clone()).or_default().insert(sid);
            }
        }
        let keys: Vec<String> = occ.keys().cloned().collect();
        let lookup: HashMap<String, ConceptId> =
            keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let doc_frequency = vec![1; keys.len()];
        let occurrences = occ.into_values().map(|s| s.into_iter().collect()).collect();
        let (lengths, by_sentence) = sentences
            .into_iter()
            .map(|(len, ks)| {
                let mut ids: Vec<ConceptId> = ks.iter().map(|k| lookup[k]).collect();
                ids.sort_unstable();
                ids.dedup();
                (len, ids)
            })
            .unzip();
        ConceptIndex {
            unit,
            keys,
            lookup,
            occurrences,
            doc_frequency,
            by_sentence,
            lengths,
            num_documents: 1,
        }
    }

    pub fn unit(&self) -> ConceptUnit {
        self.unit
    }

    /// Number of distinct concepts.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn num_sentences(&self) -> usize {
        self.by_sentence.len()
    }

    pub fn num_documents(&self) -> usize {
        self.num_documents
    }

    pub fn id(&self, key: &str) -> Option<ConceptId> {
        self.lookup.get(key).copied()
    }

    pub fn key(&self, id: ConceptId) -> &str {
        &self.keys[id]
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn concept(&self, id: ConceptId) -> Concept {
        Concept {
            key: self.keys[id].clone(),
            unit: self.unit,
        }
    }

    /// Sentences containing `key`, ascending.
    pub fn occurrences(&self, key: &str) -> Option<&[usize]> {
        self.id(key).map(|id| self.occurrences[id].as_slice())
    }

    pub fn occurrences_of(&self, id: ConceptId) -> &[usize] {
        &self.occurrences[id]
    }

    /// Number of distinct documents containing `key`; 0 when absent.
    pub fn doc_frequency(&self, key: &str) -> usize {
        self.id(key).map_or(0, |id| self.doc_frequency[id])
    }

    /// Length of a sentence in words.
    pub fn sentence_length(&self, sent_id: usize) -> usize {
        self.lengths[sent_id]
    }

    /// Concept ids present in a sentence, ascending and distinct.
    pub fn concepts_in(&self, sent_id: usize) -> &[ConceptId] {
        &self.by_sentence[sent_id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, RawDocument};
    use proptest::prelude::*;

    fn sent(text: &str) -> Sentence {
        let tokens = tokenize(text);
        Sentence {
            sent_id: 0,
            doc_id: "d".into(),
            text: text.into(),
            length_words: tokens.len(),
            tokens,
        }
    }

    fn keys(s: &Sentence, unit: ConceptUnit) -> Vec<String> {
        extract_concepts(s, unit).into_iter().map(|c| c.key).collect()
    }

    #[test]
    fn stopword_list_size() {
        let n = stopwords().len();
        assert!((170..=190).contains(&n), "{n}");
        assert!(is_stopword("the"));
        assert!(!is_stopword("cat"));
    }

    #[test]
    fn extraction_per_unit() {
        let s = sent("the cat sat");
        assert_eq!(keys(&s, ConceptUnit::Unigram), vec!["cat", "sat"]);
        assert_eq!(keys(&s, ConceptUnit::Bigram), vec!["the cat", "cat sat"]);
        assert_eq!(keys(&s, ConceptUnit::Sentence), vec!["the cat sat"]);
    }

    #[test]
    fn extraction_collapses_repeats_and_stopword_pairs() {
        let s = sent("cat and the cat");
        assert_eq!(keys(&s, ConceptUnit::Unigram), vec!["cat"]);
        assert_eq!(keys(&s, ConceptUnit::Bigram), vec!["cat and", "the cat"]);
    }

    #[test]
    fn concept_equality_is_key_equality() {
        let a = Concept { key: "cat".into(), unit: ConceptUnit::Unigram };
        let b = Concept { key: "cat".into(), unit: ConceptUnit::Sentence };
        assert_eq!(a, b);
    }

    fn corpus(docs: &[&str]) -> Corpus {
        Corpus::from_raw(
            "c",
            docs.iter().enumerate().map(|(i, t)| RawDocument {
                doc_id: format!("d{i}"),
                title: None,
                text: t.to_string(),
            }),
        )
        .unwrap()
    }

    #[test]
    fn index_occurrences_and_doc_frequency() {
        let c = corpus(&["The cat sat. A cat ran.", "Dogs bark."]);
        let idx = ConceptIndex::build(&c, ConceptUnit::Unigram);
        assert_eq!(idx.occurrences("cat").unwrap(), &[0, 1]);
        assert_eq!(idx.doc_frequency("cat"), 1);
        assert_eq!(idx.doc_frequency("dogs"), 1);
        assert_eq!(idx.doc_frequency("missing"), 0);
        assert!(idx.occurrences("the").is_none());

        let single = corpus(&["Red apples grow. Green apples fall. Pears ripen."]);
        let idx = ConceptIndex::build(&single, ConceptUnit::Unigram);
        assert!(idx.keys().iter().all(|k| idx.doc_frequency(k) == 1));
    }

    #[test]
    fn sentence_unit_occurrences_match_normalized_text() {
        let c = corpus(&["Rain fell.", "RAIN, fell! Snow fell."]);
        let idx = ConceptIndex::build(&c, ConceptUnit::Sentence);
        assert_eq!(idx.occurrences("rain fell").unwrap(), &[0, 1]);
        assert_eq!(idx.doc_frequency("rain fell"), 2);
        assert_eq!(idx.len(), 2);
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        let word = prop::sample::select(vec![
            "the", "cat", "sat", "on", "mat", "dog", "ran", "a", "and", "big", "red", "of",
        ]);
        let sentence = prop::collection::vec(word, 1..7).prop_map(|ws| {
            let mut s = ws.join(" ");
            s.replace_range(0..1, &s[0..1].to_uppercase());
            s + "."
        });
        let doc = prop::collection::vec(sentence, 1..4).prop_map(|ss| ss.join(" "));
        prop::collection::vec(doc, 1..4).prop_map(|docs| {
            let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
            corpus(&refs)
        })
    }

    fn arb_unit() -> impl Strategy<Value = ConceptUnit> {
        prop::sample::select(vec![ConceptUnit::Unigram, ConceptUnit::Bigram, ConceptUnit::Sentence])
    }

    proptest! {
        #[test]
        fn index_matches_extraction(c in arb_corpus(), unit in arb_unit()) {
            let idx = ConceptIndex::build(&c, unit);
            let mut incidences = 0;
            for s in c.sentences() {
                let ks: HashSet<String> = extract_concepts(s, unit).into_iter().map(|c| c.key).collect();
                incidences += ks.len();
                for key in idx.keys() {
                    let listed = idx.occurrences(key).unwrap().contains(&s.sent_id);
                    prop_assert_eq!(ks.contains(key), listed);
                }
            }
            let total: usize = idx.keys().iter().map(|k| idx.occurrences(k).unwrap().len()).sum();
            prop_assert_eq!(total, incidences);
            for key in idx.keys() {
                prop_assert!(!idx.occurrences(key).unwrap().is_empty());
                match unit {
                    ConceptUnit::Unigram => prop_assert!(!key.contains(' ')),
                    ConceptUnit::Bigram => prop_assert_eq!(key.matches(' ').count(), 1),
                    ConceptUnit::Sentence => {}
                }
            }
        }

        #[test]
        fn unit_monotonicity(words in prop::collection::vec("[a-z]{1,4}", 0..12)) {
            let uni = concept_keys(&words, ConceptUnit::Unigram).len();
            let bi = concept_keys(&words, ConceptUnit::Bigram).len();
            prop_assert!(uni <= words.len());
            prop_assert!(bi <= words.len().saturating_sub(1));
        }
    }
}
