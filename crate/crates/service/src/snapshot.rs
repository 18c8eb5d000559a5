use serde::{Deserialize, Serialize};

use adasum::concepts::ConceptUnit;
use adasum::corpus::Corpus;
use adasum::optimizer::{Budget, ScoringMode};
use adasum::session::{GroupContext, Query, Session, SessionConfig, TerminationReason};

/// Full session state returned by every session endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub session_id: String,
    pub corpus_id: String,
    pub cluster_id: String,
    pub iteration: usize,
    pub max_iterations: usize,
    pub terminated: bool,
    pub termination: Option<TerminationReason>,
    /// Objective over labeled concepts only.
    pub score: f64,
    /// Objective the solver maximized, provisional weights included.
    pub objective: f64,
    pub unit: ConceptUnit,
    pub scoring: ScoringMode,
    pub budget: Budget,
    pub used_budget: usize,
    pub summary: Vec<SummarySentence>,
    pub pending_queries: Vec<Query>,
    pub rejected_sentences: Vec<usize>,
    pub queried_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySentence {
    pub sent_id: usize,
    pub doc_id: String,
    pub text: String,
    pub group: GroupContext,
}

impl ApiSession {
    pub fn of(corpus_id: &str, session: &Session) -> Self {
        let corpus = session.corpus();
        let config = session.config();
        let selection = session.selection();
        ApiSession {
            session_id: session.session_id().to_string(),
            corpus_id: corpus_id.to_string(),
            cluster_id: corpus.cluster_id.clone(),
            iteration: session.iteration(),
            max_iterations: config.max_iterations,
            terminated: session.is_terminated(),
            termination: session.termination(),
            score: session.display_score(),
            objective: selection.score,
            unit: config.unit,
            scoring: config.scoring,
            budget: config.budget,
            used_budget: selection.used_budget,
            summary: selection
                .sent_ids
                .iter()
                .filter_map(|&s| corpus.sentence(s))
                .map(|s| SummarySentence {
                    sent_id: s.sent_id,
                    doc_id: s.doc_id.clone(),
                    text: s.text.clone(),
                    group: session.group_context(s.sent_id),
                })
                .collect(),
            pending_queries: session.pending().to_vec(),
            rejected_sentences: session.feedback().rejected_sentences().iter().copied().collect(),
            queried_count: session.queried().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub corpus_id: String,
    pub cluster_id: String,
    pub num_documents: usize,
    pub num_sentences: usize,
    pub total_words: usize,
    pub content_hash: String,
}

impl CorpusInfo {
    pub fn of(corpus_id: &str, corpus: &Corpus) -> Self {
        CorpusInfo {
            corpus_id: corpus_id.to_string(),
            cluster_id: corpus.cluster_id.clone(),
            num_documents: corpus.num_documents(),
            num_sentences: corpus.num_sentences(),
            total_words: corpus.total_words(),
            content_hash: corpus.content_hash(),
        }
    }
}

/// `POST /sessions` body. Omitted config fields take their defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub corpus_id: String,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

impl CreateSession {
    pub fn new(corpus_id: impl Into<String>, config: &SessionConfig) -> Self {
        CreateSession {
            corpus_id: corpus_id.into(),
            config: Some(serde_json::to_value(config).expect("config serializes")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueriesResponse {
    pub session_id: String,
    pub iteration: usize,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetUpdate {
    pub budget: Budget,
}
