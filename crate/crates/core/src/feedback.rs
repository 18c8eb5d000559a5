//! User feedback and the cumulative per-session feedback ledger.
//!
//! A concept's signed effective weight is `action × confidence × weight`.
//! Labels are keyed by concept, so a judgment applies to every occurrence of
//! that concept at once.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("{field} must lie in [0, 1], got {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("unknown sentence id {0}")]
    UnknownSentence(usize),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
}

impl FeedbackError {
    /// Name of the offending field, when the error concerns one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            FeedbackError::OutOfRange { field, .. } => Some(field),
            FeedbackError::UnknownSentence(_) => Some("reject_sentences"),
            FeedbackError::UnknownConcept(_) => Some("concept"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Reject,
}

impl Action {
    pub fn sign(self) -> f64 {
        match self {
            Action::Accept => 1.0,
            Action::Reject => -1.0,
        }
    }
}

fn default_confidence() -> f64 {
    1.0
}

/// One judgment on one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    #[serde(rename = "concept")]
    pub concept_key: String,
    pub action: Action,
    pub weight: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl Feedback {
    /// Feedback with the default confidence of 1.
    pub fn new(concept_key: impl Into<String>, action: Action, weight: f64) -> Self {
        Feedback {
            concept_key: concept_key.into(),
            action,
            weight,
            confidence: default_confidence(),
        }
    }

    pub fn accept(concept_key: impl Into<String>, weight: f64) -> Self {
        Self::new(concept_key, Action::Accept, weight)
    }

    pub fn reject(concept_key: impl Into<String>, weight: f64) -> Self {
        Self::new(concept_key, Action::Reject, weight)
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for (field, value) in [("weight", self.weight), ("confidence", self.confidence)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FeedbackError::OutOfRange { field, value });
            }
        }
        Ok(())
    }

    pub fn effective_weight(&self) -> f64 {
        self.action.sign() * self.confidence * self.weight
    }
}

/// A batch of judgments plus sentence rejections, as submitted per iteration.
///
/// Deserializes from either `{"feedback": [...], "reject_sentences": [...]}`
/// or a bare list of feedback records.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeedbackBatch {
    pub feedback: Vec<Feedback>,
    #[serde(default)]
    pub reject_sentences: Vec<usize>,
}

impl<'de> Deserialize<'de> for FeedbackBatch {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Object {
            #[serde(default)]
            feedback: Vec<Feedback>,
            #[serde(default)]
            reject_sentences: Vec<usize>,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            List(Vec<Feedback>),
            Object(Object),
        }
        Ok(match Wire::deserialize(de)? {
            Wire::List(feedback) => FeedbackBatch {
                feedback,
                reject_sentences: Vec::new(),
            },
            Wire::Object(o) => FeedbackBatch {
                feedback: o.feedback,
                reject_sentences: o.reject_sentences,
            },
        })
    }
}

impl FeedbackBatch {
    pub fn new(feedback: Vec<Feedback>) -> Self {
        FeedbackBatch {
            feedback,
            reject_sentences: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.feedback.is_empty() && self.reject_sentences.is_empty()
    }
}

/// Where an effective weight came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    Labeled,
    Provisional,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackState {
    labels: BTreeMap<String, Feedback>,
    provisional: BTreeMap<String, f64>,
    rejected_sentences: BTreeSet<usize>,
    num_sentences: usize,
}

impl FeedbackState {
    pub fn new(num_sentences: usize) -> Self {
        FeedbackState {
            labels: BTreeMap::new(),
            provisional: BTreeMap::new(),
            rejected_sentences: BTreeSet::new(),
            num_sentences,
        }
    }

    /// Seeds provisional weights; keys already labeled are skipped.
    pub fn with_provisional(mut self, weights: BTreeMap<String, f64>) -> Self {
        for (k, w) in weights {
            if !self.labels.contains_key(&k) {
                self.provisional.insert(k, w);
            }
        }
        self
    }

    /// Records `fb` as the latest label for its concept, replacing any prior
    /// label or provisional weight.
    pub fn apply_feedback(&mut self, fb: Feedback) -> Result<(), FeedbackError> {
        fb.validate()?;
        self.provisional.remove(&fb.concept_key);
        self.labels.insert(fb.concept_key.clone(), fb);
        Ok(())
    }

    /// Excludes a sentence from every later selection. Concept labels are not touched.
    pub fn reject_sentence(&mut self, sent_id: usize) -> Result<(), FeedbackError> {
        if sent_id >= self.num_sentences {
            return Err(FeedbackError::UnknownSentence(sent_id));
        }
        self.rejected_sentences.insert(sent_id);
        Ok(())
    }

    /// Validates the whole batch first, then applies it. On error nothing changes.
    pub fn apply_batch(&mut self, batch: &FeedbackBatch) -> Result<(), FeedbackError> {
        self.validate_batch(batch)?;
        for fb in &batch.feedback {
            self.apply_feedback(fb.clone())?;
        }
        for &s in &batch.reject_sentences {
            self.reject_sentence(s)?;
        }
        Ok(())
    }

    pub fn validate_batch(&self, batch: &FeedbackBatch) -> Result<(), FeedbackError> {
        for fb in &batch.feedback {
            fb.validate()?;
        }
        if let Some(&bad) = batch.reject_sentences.iter().find(|&&s| s >= self.num_sentences) {
            return Err(FeedbackError::UnknownSentence(bad));
        }
        Ok(())
    }

    pub fn effective_weight(&self, concept_key: &str) -> f64 {
        self.weight_with_source(concept_key).0
    }

    pub fn weight_with_source(&self, concept_key: &str) -> (f64, WeightSource) {
        if let Some(fb) = self.labels.get(concept_key) {
            (fb.effective_weight(), WeightSource::Labeled)
        } else if let Some(&w) = self.provisional.get(concept_key) {
            (w, WeightSource::Provisional)
        } else {
            (0.0, WeightSource::Unknown)
        }
    }

    pub fn labels(&self) -> &BTreeMap<String, Feedback> {
        &self.labels
    }

    pub fn provisional(&self) -> &BTreeMap<String, f64> {
        &self.provisional
    }

    pub fn rejected_sentences(&self) -> &BTreeSet<usize> {
        &self.rejected_sentences
    }

    pub fn is_rejected(&self, sent_id: usize) -> bool {
        self.rejected_sentences.contains(&sent_id)
    }

    pub fn num_sentences(&self) -> usize {
        self.num_sentences
    }

    /// The same ledger without provisional weights, used for reported scores.
    pub fn labeled_only(&self) -> FeedbackState {
        FeedbackState {
            provisional: BTreeMap::new(),
            ..self.clone()
        }
    }
}
