//! Seed ranking and similarity grouping used before any feedback exists.
//!
//! The initial ranking scores a sentence by the mean document frequency of
//! its content words: sentences built from terms that recur across the
//! cluster rank high. Grouping is single-link clustering on TF-IDF cosine.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{is_stopword, ConceptIndex, ConceptUnit};
use crate::corpus::{Corpus, Sentence};

/// Default cosine threshold for grouping near-duplicate sentences.
pub const DEFAULT_GROUPING_THRESHOLD: f64 = 0.7;

/// Provisional concept weight = this factor times the best containing
/// sentence's initial score.
pub const PROVISIONAL_SCALE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("initial ranking needs a unigram index, got {0}")]
    WrongUnit(ConceptUnit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSentences {
    /// Normalized score in [0, 1], indexed by `sent_id`.
    pub scores: Vec<f64>,
    /// `sent_id`s by descending score, ties by ascending id.
    pub order: Vec<usize>,
}

impl RankedSentences {
    pub(crate) fn from_raw(raw: Vec<f64>) -> Self {
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scores: Vec<f64> = if max > min {
            raw.iter().map(|v| (v - min) / (max - min)).collect()
        } else {
            vec![1.0; raw.len()]
        };
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        RankedSentences { scores, order }
    }

    /// Zero-based rank position of each sentence, indexed by `sent_id`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &s) in self.order.iter().enumerate() {
            pos[s] = p;
        }
        pos
    }
}

/// Raw (unnormalized) seed scores given a document-frequency lookup.
///
/// Frequencies are summed before the single division so that sentences with
/// equal score fractions get bit-identical scores and tie-break by id.
pub fn raw_scores(corpus: &Corpus, doc_frequency: impl Fn(&str) -> f64) -> Vec<f64> {
    let n_docs = corpus.num_documents() as f64;
    corpus
        .sentences()
        .map(|s| {
            let sum: f64 = s
                .tokens
                .iter()
                .filter(|t| !is_stopword(t))
                .map(|t| doc_frequency(t))
                .sum();
            sum / (n_docs * s.length_words as f64)
        })
        .collect()
}

/// Seed ranking from a unigram index, min-max normalized. A corpus whose
/// raw scores are all equal maps every sentence to 1.0.
pub fn initial_rank(corpus: &Corpus, index: &ConceptIndex) -> Result<RankedSentences, RankingError> {
    if index.unit() != ConceptUnit::Unigram {
        return Err(RankingError::WrongUnit(index.unit()));
    }
    let raw = raw_scores(corpus, |t| index.doc_frequency(t) as f64);
    Ok(RankedSentences::from_raw(raw))
}

/// Provisional weight for every concept of `index`.
pub fn provisional_weights(index: &ConceptIndex, ranked: &RankedSentences) -> BTreeMap<String, f64> {
    index
        .keys()
        .iter()
        .enumerate()
        .map(|(id, key)| {
            let best = index
                .occurrences_of(id)
                .iter()
                .map(|&s| ranked.scores[s])
                .fold(0.0, f64::max);
            (key.clone(), PROVISIONAL_SCALE * best)
        })
        .collect()
}

/// Unigram TF-IDF model with sentences as the IDF documents.
///
/// `idf(t) = ln((1 + n) / (1 + sf(t))) + 1`, where `n` is the number of
/// sentences and `sf(t)` the number of sentences containing `t`. Every idf is
/// positive, so any non-empty sentence has a non-zero vector.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    idf: HashMap<String, f64>,
    default_idf: f64,
    vectors: Vec<SparseVector>,
}

#[derive(Debug, Clone, PartialEq)]
struct SparseVector {
    // Sorted by term.
    entries: Vec<(String, f64)>,
    norm: f64,
}

impl SparseVector {
    fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.entries[i].1 * other.entries[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    fn cosine(&self, other: &SparseVector) -> f64 {
        if self.entries == other.entries {
            return if self.norm > 0.0 { 1.0 } else { 0.0 };
        }
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        (self.dot(other) / (self.norm * other.norm)).clamp(0.0, 1.0)
    }
}

impl TfIdfModel {
    pub fn fit(corpus: &Corpus) -> Self {
        let n = corpus.num_sentences() as f64;
        let mut sf: HashMap<String, usize> = HashMap::new();
        for s in corpus.sentences() {
            let mut uniq: Vec<&String> = s.tokens.iter().collect();
            uniq.sort();
            uniq.dedup();
            for t in uniq {
                *sf.entry(t.clone()).or_default() += 1;
            }
        }
        let idf = sf
            .into_iter()
            .map(|(t, c)| (t, ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0))
            .collect();
        let mut model = TfIdfModel {
            idf,
            default_idf: (1.0 + n).ln() + 1.0,
            vectors: Vec::new(),
        };
        model.vectors = corpus.sentences().map(|s| model.vectorize(&s.tokens)).collect();
        model
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(self.default_idf)
    }

    fn vectorize(&self, tokens: &[String]) -> SparseVector {
        let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1.0;
        }
        let entries: Vec<(String, f64)> = tf
            .into_iter()
            .map(|(t, c)| (t.to_string(), c * self.idf(t)))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        SparseVector { entries, norm }
    }

    /// Cosine similarity of two sentences' TF-IDF vectors, in [0, 1].
    pub fn sentence_similarity(&self, a: &Sentence, b: &Sentence) -> f64 {
        self.vectorize(&a.tokens).cosine(&self.vectorize(&b.tokens))
    }

    /// Similarity between two sentences of the fitted corpus.
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        self.vectors[a].cosine(&self.vectors[b])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceGroups {
    /// Disjoint groups covering all sentences; members ascending, groups
    /// ordered by their smallest member.
    pub groups: Vec<Vec<usize>>,
    /// Highest-ranked member of each group.
    pub representative: Vec<usize>,
    /// Group index of each sentence, by `sent_id`.
    pub group_of: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-link clustering: sentences are joined when their similarity is at
/// least `threshold`.
pub fn group_similar(
    model: &TfIdfModel,
    ranked: &RankedSentences,
    threshold: f64,
) -> SentenceGroups {
    let n = model.vectors.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            (a + 1..n)
                .filter(move |&b| model.similarity(a, b) >= threshold)
                .map(move |b| (a, b))
        })
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut root_to_group: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![0; n];
    for (s, slot) in group_of.iter_mut().enumerate() {
        let root = find(&mut parent, s);
        let g = *root_to_group.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(s);
        *slot = g;
    }
    let positions = ranked.positions();
    let representative = groups
        .iter()
        .map(|members| *members.iter().min_by_key(|&&s| positions[s]).expect("non-empty group"))
        .collect();
    SentenceGroups {
        groups,
        representative,
        group_of,
    }
}
