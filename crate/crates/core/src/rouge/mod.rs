//! ROUGE-1, ROUGE-2 and ROUGE-L.
//!
//! ROUGE-n against several references sums clipped matches and reference
//! n-gram counts over all references before dividing. ROUGE-L scores each
//! reference separately and keeps the one with the highest F. All ratios are
//! formed from integer counts, so [`RougeScore::recall_ratio`] and friends are
//! exact.
//!
//! Two protocols are supported: recall on the candidate truncated to its
//! first 75 words, and full-length F1.

mod porter;

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;
pub use porter::stem;

/// Word limit of the limited-length recall protocol.
pub const LIMITED_LENGTH_WORDS: usize = 75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RougeError {
    #[error("at least one reference summary is required")]
    NoReferences,
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeVariant {
    Rouge1,
    Rouge2,
    #[serde(rename = "rougeL", alias = "rougel")]
    RougeL,
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RougeVariant::Rouge1 => "rouge1",
            RougeVariant::Rouge2 => "rouge2",
            RougeVariant::RougeL => "rougeL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RougeMode {
    /// Recall only, candidate truncated to 75 words.
    LimitedRecall75,
    /// F-measure on the whole candidate.
    FullF1,
}

impl fmt::Display for RougeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RougeMode::LimitedRecall75 => "limited-recall-75",
            RougeMode::FullF1 => "full-f1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeConfig {
    pub variant: RougeVariant,
    pub mode: RougeMode,
    pub stemming: bool,
    pub beta: f64,
}

impl RougeConfig {
    pub fn new(variant: RougeVariant, mode: RougeMode) -> Self {
        RougeConfig {
            variant,
            mode,
            stemming: true,
            beta: 1.0,
        }
    }

    pub fn with_stemming(mut self, stemming: bool) -> Self {
        self.stemming = stemming;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub match_count: u64,
    pub candidate_count: u64,
    pub reference_count: u64,
}

fn ratio(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

fn div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl RougeScore {
    fn from_counts(matches: u64, candidate: u64, reference: u64, beta: f64) -> Self {
        let b2 = beta * beta;
        let (m, c, r) = (matches as f64, candidate as f64, reference as f64);
        // F_beta = (1 + b^2) P R / (R + b^2 P) = (1 + b^2) m / (c + b^2 r).
        let f1 = if matches == 0 {
            0.0
        } else {
            div((1.0 + b2) * m, c + b2 * r)
        };
        RougeScore {
            recall: div(m, r),
            precision: div(m, c),
            f1,
            match_count: matches,
            candidate_count: candidate,
            reference_count: reference,
        }
    }

    pub fn recall_ratio(&self) -> Ratio<u64> {
        ratio(self.match_count, self.reference_count)
    }

    pub fn precision_ratio(&self) -> Ratio<u64> {
        ratio(self.match_count, self.candidate_count)
    }

    /// Exact balanced F-measure, `2m / (c + r)`.
    pub fn f1_ratio(&self) -> Ratio<u64> {
        ratio(2 * self.match_count, self.candidate_count + self.reference_count)
    }

    /// The number a protocol reports: recall for limited-length, F for full-length.
    pub fn primary(&self, mode: RougeMode) -> f64 {
        match mode {
            RougeMode::LimitedRecall75 => self.recall,
            RougeMode::FullF1 => self.f1,
        }
    }
}

/// First `k` whitespace-delimited words, joined by single spaces.
pub fn truncate_words(text: &str, k: usize) -> String {
    text.split_whitespace().take(k).collect::<Vec<_>>().join(" ")
}

/// Contiguous n-grams with multiplicity.
pub fn ngrams(tokens: &[String], n: usize) -> Result<HashMap<&[String], u64>, RougeError> {
    if n == 0 {
        return Err(RougeError::ZeroOrder);
    }
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    Ok(counts)
}

fn prepare(text: &str, stemming: bool) -> Vec<String> {
    let tokens = tokenize(text);
    if stemming {
        tokens.iter().map(|t| stem(t)).collect()
    } else {
        tokens
    }
}

fn prepare_candidate(candidate: &str, config: &RougeConfig) -> Vec<String> {
    match config.mode {
        RougeMode::LimitedRecall75 => {
            prepare(&truncate_words(candidate, LIMITED_LENGTH_WORDS), config.stemming)
        }
        RougeMode::FullF1 => prepare(candidate, config.stemming),
    }
}

pub fn rouge_n(
    candidate: &str,
    references: &[impl AsRef<str>],
    n: usize,
    config: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    if references.is_empty() {
        return Err(RougeError::NoReferences);
    }
    let cand_tokens = prepare_candidate(candidate, config);
    let cand = ngrams(&cand_tokens, n)?;
    let cand_total: u64 = cand.values().sum();
    let (mut matches, mut ref_total) = (0, 0);
    for reference in references {
        let ref_tokens = prepare(reference.as_ref(), config.stemming);
        let refs = ngrams(&ref_tokens, n)?;
        ref_total += refs.values().sum::<u64>();
        matches += refs
            .iter()
            .map(|(g, &rc)| rc.min(cand.get(g).copied().unwrap_or(0)))
            .sum::<u64>();
    }
    let candidate_count = cand_total * references.len() as u64;
    Ok(RougeScore::from_counts(matches, candidate_count, ref_total, config.beta))
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(
    candidate: &str,
    references: &[impl AsRef<str>],
    config: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    if references.is_empty() {
        return Err(RougeError::NoReferences);
    }
    let cand = prepare_candidate(candidate, config);
    let mut best: Option<RougeScore> = None;
    for reference in references {
        let r = prepare(reference.as_ref(), config.stemming);
        let lcs = lcs_len(&cand, &r) as u64;
        let score = RougeScore::from_counts(lcs, cand.len() as u64, r.len() as u64, config.beta);
        if best.is_none_or(|b| score.f1 > b.f1) {
            best = Some(score);
        }
    }
    Ok(best.expect("non-empty references"))
}

/// Scores a candidate with the variant named in `config`.
pub fn evaluate(
    candidate: &str,
    references: &[impl AsRef<str>],
    config: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    match config.variant {
        RougeVariant::Rouge1 => rouge_n(candidate, references, 1, config),
        RougeVariant::Rouge2 => rouge_n(candidate, references, 2, config),
        RougeVariant::RougeL => rouge_l(candidate, references, config),
    }
}

/// Mean over references of the protocol's primary number, scoring the
/// candidate against each reference on its own.
pub fn per_reference_mean(
    candidate: &str,
    references: &[impl AsRef<str>],
    config: &RougeConfig,
) -> Result<f64, RougeError> {
    if references.is_empty() {
        return Err(RougeError::NoReferences);
    }
    let mut total = 0.0;
    for r in references {
        total += evaluate(candidate, &[r.as_ref()], config)?.primary(config.mode);
    }
    Ok(total / references.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    fn full(variant: RougeVariant) -> RougeConfig {
        RougeConfig::new(variant, RougeMode::FullF1).with_stemming(false)
    }

    #[test]
    fn ngram_counts() {
        let t = toks("a b a");
        let g = ngrams(&t, 1).unwrap();
        assert_eq!(g[&t[0..1]], 2);
        assert_eq!(g[&t[1..2]], 1);
        let t = toks("a b c");
        let g = ngrams(&t, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.values().all(|&c| c == 1));
        assert!(ngrams(&toks("a"), 2).unwrap().is_empty());
        assert_eq!(ngrams(&t, 0), Err(RougeError::ZeroOrder));
    }

    #[test]
    fn hand_counted_unigram_and_bigram() {
        let s = rouge_n("the cat sat", &["the cat ran"], 1, &full(RougeVariant::Rouge1)).unwrap();
        assert_eq!(s.recall_ratio(), Ratio::new(2, 3));
        assert_eq!(s.precision_ratio(), Ratio::new(2, 3));
        assert_eq!(s.f1_ratio(), Ratio::new(2, 3));
        assert_eq!(s.f1, 2.0 / 3.0);
        let s = rouge_n("the cat sat", &["the cat ran"], 2, &full(RougeVariant::Rouge2)).unwrap();
        assert_eq!(s.recall_ratio(), Ratio::new(1, 2));
    }

    #[test]
    fn lcs_case() {
        let s = rouge_l("a b c d", &["a c d"], &full(RougeVariant::RougeL)).unwrap();
        assert_eq!(s.match_count, 3);
        assert_eq!(s.recall_ratio(), Ratio::from_integer(1));
        assert_eq!(s.precision_ratio(), Ratio::new(3, 4));
        let s = rouge_l("x y", &["a b"], &full(RougeVariant::RougeL)).unwrap();
        assert_eq!((s.recall, s.precision, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_scores_one() {
        for v in [RougeVariant::Rouge1, RougeVariant::Rouge2, RougeVariant::RougeL] {
            let s = evaluate("storms flooded the coastal town", &["storms flooded the coastal town"], &full(v)).unwrap();
            assert_eq!((s.recall, s.precision, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn multi_reference_sums_counts() {
        // ref1 "the cat": 2 unigrams, 2 matched; ref2 "a dog": 2, 0 matched.
        let s = rouge_n("the cat", &["the cat", "a dog"], 1, &full(RougeVariant::Rouge1)).unwrap();
        assert_eq!(s.recall_ratio(), Ratio::new(2, 4));
        assert_eq!(s.precision_ratio(), Ratio::new(2, 4));
        let l = rouge_l("the cat", &["a dog", "the cat"], &full(RougeVariant::RougeL)).unwrap();
        assert_eq!(l.f1, 1.0);
    }

    #[test]
    fn clipping() {
        let s = rouge_n("the the the", &["the cat"], 1, &full(RougeVariant::Rouge1)).unwrap();
        assert_eq!(s.match_count, 1);
    }

    #[test]
    fn stemming_matches_inflections() {
        let cfg = RougeConfig::new(RougeVariant::Rouge1, RougeMode::FullF1);
        let s = rouge_n("floods hit towns", &["flooding hits town"], 1, &cfg).unwrap();
        assert_eq!(s.match_count, 3);
        let s = rouge_n("floods hit towns", &["flooding hits town"], 1, &cfg.with_stemming(false)).unwrap();
        assert_eq!(s.match_count, 0);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_words("a b c", 2), "a b");
        assert_eq!(truncate_words("a b c", 0), "");
        assert_eq!(truncate_words("a  b\nc", 10), "a b c");
        let long: String = (0..100).map(|i| format!("w{i} ")).collect();
        let reference: String = (0..100).map(|i| format!("w{i} ")).collect();
        let cfg = RougeConfig::new(RougeVariant::Rouge1, RougeMode::LimitedRecall75).with_stemming(false);
        let s = rouge_n(&long, &[&reference], 1, &cfg).unwrap();
        assert_eq!(s.recall_ratio(), Ratio::new(75, 100));
        assert_eq!(s.candidate_count, 75);
    }

    #[test]
    fn empty_references_error() {
        let none: [&str; 0] = [];
        assert_eq!(rouge_n("a", &none, 1, &full(RougeVariant::Rouge1)), Err(RougeError::NoReferences));
        assert_eq!(rouge_l("a", &none, &full(RougeVariant::RougeL)), Err(RougeError::NoReferences));
    }

    #[test]
    fn per_reference_mean_averages() {
        let cfg = full(RougeVariant::Rouge1);
        let m = per_reference_mean("the cat", &["the cat", "a dog"], &cfg).unwrap();
        assert_eq!(m, 0.5);
    }

    fn words() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..120)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn scores_bounded_and_self_identical(c in words(), r in words(), n in 1usize..3) {
            let cfg = full(RougeVariant::Rouge1);
            let s = rouge_n(&c, &[&r], n, &cfg).unwrap();
            for v in [s.recall, s.precision, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let l = rouge_l(&c, &[&r], &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&l.f1));
            let same = rouge_n(&c, &[&c], 1, &cfg).unwrap();
            prop_assert_eq!(same.f1, 1.0);
        }

        #[test]
        fn limited_recall_never_exceeds_full_recall(c in words(), r in words()) {
            let base = RougeConfig::new(RougeVariant::Rouge1, RougeMode::FullF1);
            let limited = RougeConfig { mode: RougeMode::LimitedRecall75, ..base };
            let a = rouge_n(&c, &[&r], 1, &limited).unwrap();
            let b = rouge_n(&c, &[&r], 1, &base).unwrap();
            prop_assert!(a.recall_ratio() <= b.recall_ratio());
            if c.split_whitespace().count() <= LIMITED_LENGTH_WORDS {
                prop_assert_eq!(a.recall_ratio(), b.recall_ratio());
            }
        }
    }
}
