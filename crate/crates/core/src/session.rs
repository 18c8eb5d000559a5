//! The interactive loop: query concepts, take feedback, re-solve, repeat.
//!
//! A session starts from the seed ranking with provisional concept weights,
//! then alternates [`Session::next_queries`] and [`Session::submit_feedback`]
//! until the user is satisfied, no unqueried concept remains, or the
//! iteration limit is reached.
//!
//! Every mutation is appended to a transcript. Saved sessions store the
//! corpus, the starting config and the transcript; loading replays them,
//! which reproduces the session exactly because every step is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{Concept, ConceptIndex, ConceptUnit};
use crate::corpus::Corpus;
use crate::feedback::{FeedbackBatch, FeedbackError, FeedbackState, WeightSource};
use crate::optimizer::{self, Budget, OptimizerError, ScoringMode, Selection, SolverConfig};
use crate::ranking::{
    group_similar, initial_rank, provisional_weights, RankedSentences, SentenceGroups, TfIdfModel,
    DEFAULT_GROUPING_THRESHOLD,
};

const SESSION_FORMAT: &str = "adasum-session";
pub const SESSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session already terminated ({0})")]
    Terminated(TerminationReason),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("invalid config: {field} {message}")]
    Config { field: &'static str, message: &'static str },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported session file version {found} (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt session file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub unit: ConceptUnit,
    pub budget: Budget,
    pub scoring: ScoringMode,
    pub query_batch_size: usize,
    pub max_iterations: usize,
    pub grouping_threshold: f64,
    pub solver: SolverConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            unit: ConceptUnit::Unigram,
            budget: Budget::words(75).expect("positive"),
            scoring: ScoringMode::Coverage,
            query_batch_size: 10,
            max_iterations: 10,
            grouping_threshold: DEFAULT_GROUPING_THRESHOLD,
            solver: SolverConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.query_batch_size == 0 {
            return Err(SessionError::Config { field: "query_batch_size", message: "must be at least 1" });
        }
        if self.max_iterations == 0 {
            return Err(SessionError::Config { field: "max_iterations", message: "must be at least 1" });
        }
        if !(0.0..=1.0).contains(&self.grouping_threshold) {
            return Err(SessionError::Config { field: "grouping_threshold", message: "must lie in [0, 1]" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    UserSatisfied,
    NoNewConcepts,
    MaxIterations,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminationReason::UserSatisfied => "user_satisfied",
            TerminationReason::NoNewConcepts => "no_new_concepts",
            TerminationReason::MaxIterations => "max_iterations",
        })
    }
}

/// One transcript entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    /// A submitted batch and the queries that were on screen when it was sent.
    Feedback {
        batch: FeedbackBatch,
        presented: Vec<String>,
    },
    AmendBudget { budget: Budget },
    Satisfied,
}

/// The sentence group a query is shown with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupContext {
    /// Sentence the concept was drawn from.
    pub source_sentence: usize,
    pub group: usize,
    pub representative: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub concept: Concept,
    pub priority: f64,
    pub context: GroupContext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    session_id: String,
    corpus: Arc<Corpus>,
    initial_config: SessionConfig,
    config: SessionConfig,
    index: ConceptIndex,
    ranked: RankedSentences,
    positions: Vec<usize>,
    groups: SentenceGroups,
    feedback: FeedbackState,
    selection: Selection,
    iteration: usize,
    queried: BTreeSet<String>,
    pending: Vec<Query>,
    termination: Option<TerminationReason>,
    transcript: Vec<SessionEvent>,
}

impl Session {
    /// Starts a session with a fresh random id.
    pub fn start(corpus: Arc<Corpus>, config: SessionConfig) -> Result<Self, SessionError> {
        Self::start_with_id(uuid::Uuid::new_v4().to_string(), corpus, config)
    }

    pub fn start_with_id(
        session_id: impl Into<String>,
        corpus: Arc<Corpus>,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        config.validate()?;
        let index = ConceptIndex::build(&corpus, config.unit);
        let ranked = if config.unit == ConceptUnit::Unigram {
            initial_rank(&corpus, &index)
        } else {
            initial_rank(&corpus, &ConceptIndex::build(&corpus, ConceptUnit::Unigram))
        }
        .expect("unigram index");
        let groups = group_similar(&TfIdfModel::fit(&corpus), &ranked, config.grouping_threshold);
        let feedback = FeedbackState::new(corpus.num_sentences())
            .with_provisional(provisional_weights(&index, &ranked));
        let selection = optimizer::solve(&feedback, &index, config.budget, config.scoring, config.solver)?;
        let mut session = Session {
            session_id: session_id.into(),
            positions: ranked.positions(),
            corpus,
            initial_config: config.clone(),
            config,
            index,
            ranked,
            groups,
            feedback,
            selection,
            iteration: 0,
            queried: BTreeSet::new(),
            pending: Vec::new(),
            termination: None,
            transcript: Vec::new(),
        };
        if session.compute_queries(1).is_empty() {
            session.termination = Some(TerminationReason::NoNewConcepts);
        }
        Ok(session)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn index(&self) -> &ConceptIndex {
        &self.index
    }

    pub fn ranked(&self) -> &RankedSentences {
        &self.ranked
    }

    pub fn groups(&self) -> &SentenceGroups {
        &self.groups
    }

    pub fn feedback(&self) -> &FeedbackState {
        &self.feedback
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn queried(&self) -> &BTreeSet<String> {
        &self.queried
    }

    /// The most recently presented, not yet answered, queries.
    pub fn pending(&self) -> &[Query] {
        &self.pending
    }

    pub fn termination(&self) -> Option<TerminationReason> {
        self.termination
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn transcript(&self) -> &[SessionEvent] {
        &self.transcript
    }

    /// Objective of the current selection counting labeled concepts only.
    pub fn display_score(&self) -> f64 {
        optimizer::score_summary(
            &self.selection.sent_ids,
            &self.feedback.labeled_only(),
            &self.index,
            self.config.scoring,
        )
    }

    /// Selected sentences in document order, one per line.
    pub fn summary_text(&self) -> String {
        self.selection
            .sent_ids
            .iter()
            .filter_map(|&s| self.corpus.sentence(s))
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn group_context(&self, sent_id: usize) -> GroupContext {
        let group = self.groups.group_of[sent_id];
        GroupContext {
            source_sentence: sent_id,
            group,
            representative: self.groups.representative[group],
            members: self.groups.groups[group].clone(),
        }
    }

    fn priority(&self, concept: usize) -> f64 {
        let occ = self.index.occurrences_of(concept);
        let best = occ.iter().map(|&s| self.positions[s]).min().unwrap_or(usize::MAX - 1);
        occ.len() as f64 / (1.0 + best as f64)
    }

    /// Unqueried concepts of the current selection by descending priority,
    /// then those of other unselected sentences.
    fn compute_queries(&self, k: usize) -> Vec<Query> {
        let mut out: Vec<Query> = Vec::new();
        let mut seen: HashSet<usize> = HashSet::new();

        // Best-ranked selected sentence containing each concept.
        let mut source: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in &self.selection.sent_ids {
            for &c in self.index.concepts_in(s) {
                if self.queried.contains(self.index.key(c)) {
                    continue;
                }
                source
                    .entry(c)
                    .and_modify(|cur| {
                        if self.positions[s] < self.positions[*cur] {
                            *cur = s;
                        }
                    })
                    .or_insert(s);
            }
        }
        let mut first: Vec<(usize, usize)> = source.into_iter().collect();
        self.sort_by_priority(&mut first);
        for (c, s) in first {
            seen.insert(c);
            out.push(self.query(c, s));
        }

        if out.len() < k {
            // Unselected group representatives in rank order, then every other
            // unselected sentence, so a batch is only short once fewer than
            // `k` reachable concepts remain.
            let selected: HashSet<usize> = self.selection.sent_ids.iter().copied().collect();
            let is_rep: HashSet<usize> = self.groups.representative.iter().copied().collect();
            let mut rest: Vec<usize> = self
                .ranked
                .order
                .iter()
                .copied()
                .filter(|s| !selected.contains(s) && !self.feedback.is_rejected(*s))
                .collect();
            rest.sort_by_key(|s| !is_rep.contains(s));
            for sid in rest {
                let mut extra: Vec<(usize, usize)> = self
                    .index
                    .concepts_in(sid)
                    .iter()
                    .filter(|&&c| !seen.contains(&c) && !self.queried.contains(self.index.key(c)))
                    .map(|&c| (c, sid))
                    .collect();
                self.sort_by_priority(&mut extra);
                for (c, s) in extra {
                    seen.insert(c);
                    out.push(self.query(c, s));
                }
                if out.len() >= k {
                    break;
                }
            }
        }
        out.truncate(k);
        out
    }

    fn sort_by_priority(&self, items: &mut [(usize, usize)]) {
        items.sort_by(|a, b| {
            self.priority(b.0)
                .total_cmp(&self.priority(a.0))
                .then_with(|| self.index.key(a.0).cmp(self.index.key(b.0)))
        });
    }

    fn query(&self, concept: usize, sent_id: usize) -> Query {
        Query {
            concept: self.index.concept(concept),
            priority: self.priority(concept),
            context: self.group_context(sent_id),
        }
    }

    /// Up to `k` concepts to ask about next. The returned queries become
    /// pending; they count as queried once the next batch is submitted.
    pub fn next_queries(&mut self, k: usize) -> Result<Vec<Query>, SessionError> {
        if let Some(reason) = self.termination {
            return Err(SessionError::Terminated(reason));
        }
        let queries = self.compute_queries(k);
        self.pending = queries.clone();
        Ok(queries)
    }

    /// Applies a feedback batch atomically and re-solves.
    pub fn submit_feedback(&mut self, batch: FeedbackBatch) -> Result<(), SessionError> {
        let presented = self.pending.iter().map(|q| q.concept.key.clone()).collect();
        self.apply_iteration(batch, presented)?;
        self.pending.clear();
        Ok(())
    }

    fn apply_iteration(&mut self, batch: FeedbackBatch, presented: Vec<String>) -> Result<(), SessionError> {
        if let Some(reason) = self.termination {
            return Err(SessionError::Terminated(reason));
        }
        self.feedback.validate_batch(&batch)?;
        if let Some(fb) = batch.feedback.iter().find(|f| self.index.id(&f.concept_key).is_none()) {
            return Err(FeedbackError::UnknownConcept(fb.concept_key.clone()).into());
        }
        let mut next = self.feedback.clone();
        next.apply_batch(&batch)?;
        let selection = optimizer::solve(&next, &self.index, self.config.budget, self.config.scoring, self.config.solver)?;

        self.feedback = next;
        self.selection = selection;
        self.queried.extend(presented.iter().cloned());
        self.queried.extend(batch.feedback.iter().map(|f| f.concept_key.clone()));
        self.iteration += 1;
        self.transcript.push(SessionEvent::Feedback { batch, presented });

        if self.compute_queries(1).is_empty() {
            self.termination = Some(TerminationReason::NoNewConcepts);
        } else if self.iteration >= self.config.max_iterations {
            self.termination = Some(TerminationReason::MaxIterations);
        }
        Ok(())
    }

    /// Changes the budget between iterations and re-solves.
    pub fn amend_budget(&mut self, budget: Budget) -> Result<(), SessionError> {
        if let Some(reason) = self.termination {
            return Err(SessionError::Terminated(reason));
        }
        self.selection = optimizer::solve(&self.feedback, &self.index, budget, self.config.scoring, self.config.solver)?;
        self.config.budget = budget;
        self.transcript.push(SessionEvent::AmendBudget { budget });
        Ok(())
    }

    /// Ends the session, freezing the current selection. Idempotent.
    pub fn mark_satisfied(&mut self) {
        if self.termination.is_none() {
            self.termination = Some(TerminationReason::UserSatisfied);
            self.transcript.push(SessionEvent::Satisfied);
        }
    }

    /// Structured summary with the per-concept weight table.
    pub fn export(&self) -> SummaryExport {
        let sentences = self
            .selection
            .sent_ids
            .iter()
            .filter_map(|&s| self.corpus.sentence(s))
            .map(|s| ExportSentence {
                sent_id: s.sent_id,
                doc_id: s.doc_id.clone(),
                text: s.text.clone(),
            })
            .collect();
        let mut keys: BTreeSet<&str> = self.feedback.labels().keys().map(String::as_str).collect();
        for &s in &self.selection.sent_ids {
            keys.extend(self.index.concepts_in(s).iter().map(|&c| self.index.key(c)));
        }
        let weights = keys
            .into_iter()
            .map(|k| {
                let (weight, source) = self.feedback.weight_with_source(k);
                ConceptWeight {
                    concept: k.to_string(),
                    weight,
                    source,
                }
            })
            .collect();
        SummaryExport {
            session_id: self.session_id.clone(),
            cluster_id: self.corpus.cluster_id.clone(),
            iteration: self.iteration,
            termination: self.termination,
            budget: self.config.budget,
            scoring: self.config.scoring,
            score: self.display_score(),
            objective: self.selection.score,
            used_budget: self.selection.used_budget,
            sent_ids: self.selection.sent_ids.clone(),
            sentences,
            weights,
        }
    }

    pub fn to_file_json(&self) -> String {
        let file = SessionFile {
            format: SESSION_FORMAT.to_string(),
            version: SESSION_FORMAT_VERSION,
            session_id: self.session_id.clone(),
            config: self.initial_config.clone(),
            corpus_hash: self.corpus.content_hash(),
            corpus: (*self.corpus).clone(),
            transcript: self.transcript.clone(),
        };
        serde_json::to_string_pretty(&file).expect("session serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        fs::write(path, self.to_file_json())?;
        Ok(())
    }

    pub fn from_file_json(text: &str) -> Result<Self, SessionError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str());
        let version = value.get("version");
        if format != Some(SESSION_FORMAT) || version.and_then(|v| v.as_u64()) != Some(SESSION_FORMAT_VERSION as u64) {
            return Err(SessionError::VersionMismatch {
                found: version.map_or_else(|| "none".to_string(), |v| v.to_string()),
                expected: SESSION_FORMAT_VERSION,
            });
        }
        let file: SessionFile =
            serde_json::from_value(value).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        if file.corpus.content_hash() != file.corpus_hash {
            return Err(SessionError::Corrupt("corpus hash mismatch".into()));
        }
        Self::replay(file.session_id, Arc::new(file.corpus), file.config, &file.transcript)
            .map_err(|e| SessionError::Corrupt(format!("transcript replay failed: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        Self::from_file_json(&fs::read_to_string(path)?)
    }

    /// Rebuilds a session from its starting point and transcript.
    pub fn replay(
        session_id: impl Into<String>,
        corpus: Arc<Corpus>,
        config: SessionConfig,
        transcript: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let mut session = Self::start_with_id(session_id, corpus, config)?;
        for event in transcript {
            match event {
                SessionEvent::Feedback { batch, presented } => {
                    session.apply_iteration(batch.clone(), presented.clone())?;
                }
                SessionEvent::AmendBudget { budget } => session.amend_budget(*budget)?,
                SessionEvent::Satisfied => session.mark_satisfied(),
            }
        }
        Ok(session)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    format: String,
    version: u32,
    session_id: String,
    config: SessionConfig,
    corpus_hash: String,
    corpus: Corpus,
    transcript: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSentence {
    pub sent_id: usize,
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptWeight {
    pub concept: String,
    pub weight: f64,
    pub source: WeightSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryExport {
    pub session_id: String,
    pub cluster_id: String,
    pub iteration: usize,
    pub termination: Option<TerminationReason>,
    pub budget: Budget,
    pub scoring: ScoringMode,
    /// Objective over labeled concepts only.
    pub score: f64,
    /// Objective the solver maximized, provisional weights included.
    pub objective: f64,
    pub used_budget: usize,
    pub sent_ids: Vec<usize>,
    pub sentences: Vec<ExportSentence>,
    pub weights: Vec<ConceptWeight>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RawDocument;
    use crate::feedback::Feedback;

    fn corpus() -> Arc<Corpus> {
        Arc::new(
            Corpus::from_raw(
                "c",
                vec![
                    RawDocument { doc_id: "a".into(), title: None, text: "Storm hits coast. Rain floods streets. Mayor urges calm.".into() },
                    RawDocument { doc_id: "b".into(), title: None, text: "Storm floods coast towns. Schools close early.".into() },
                ],
            )
            .unwrap(),
        )
    }

    fn config() -> SessionConfig {
        SessionConfig { budget: Budget::words(6).unwrap(), query_batch_size: 3, ..Default::default() }
    }

    #[test]
    fn start_solves_with_provisional_weights() {
        let s = Session::start(corpus(), config()).unwrap();
        assert_eq!(s.iteration(), 0);
        let direct = optimizer::solve(s.feedback(), s.index(), s.config().budget, s.config().scoring, s.config().solver).unwrap();
        assert_eq!(s.selection(), &direct);
        assert!(!s.selection().is_empty());
        assert_eq!(s.display_score(), 0.0);
        assert!(s.selection().used_budget <= 6);
    }

    #[test]
    fn tiny_budget_is_respected() {
        let cfg = SessionConfig { budget: Budget::words(1).unwrap(), ..config() };
        let s = Session::start(corpus(), cfg).unwrap();
        assert!(s.selection().is_empty());
    }

    #[test]
    fn sentence_unit_queries_whole_sentences() {
        let cfg = SessionConfig { unit: ConceptUnit::Sentence, ..config() };
        let mut s = Session::start(corpus(), cfg).unwrap();
        let q = s.next_queries(2).unwrap();
        assert!(!q.is_empty());
        for query in q {
            assert_eq!(query.concept.unit, ConceptUnit::Sentence);
            let src = s.corpus().sentence(query.context.source_sentence).unwrap();
            assert_eq!(src.tokens.join(" "), query.concept.key);
        }
    }

    #[test]
    fn queries_come_from_selection_first() {
        let mut s = Session::start(corpus(), config()).unwrap();
        let sel: BTreeSet<usize> = s.selection().sent_ids.iter().copied().collect();
        let in_selection: BTreeSet<String> = sel
            .iter()
            .flat_map(|&x| s.index().concepts_in(x).iter().map(|&c| s.index().key(c).to_string()))
            .collect();
        let q = s.next_queries(100).unwrap();
        let n_first = in_selection.len();
        for (i, query) in q.iter().enumerate() {
            assert_eq!(i < n_first, in_selection.contains(&query.concept.key), "{i}");
        }
        for w in q[..n_first].windows(2) {
            assert!(w[0].priority >= w[1].priority);
        }
        assert_eq!(s.pending().len(), q.len());
    }

    #[test]
    fn feedback_round_trip_and_termination() {
        let mut s = Session::start(corpus(), config()).unwrap();
        let q = s.next_queries(3).unwrap();
        let batch = FeedbackBatch::new(q.iter().map(|q| Feedback::accept(q.concept.key.clone(), 1.0)).collect());
        s.submit_feedback(batch).unwrap();
        assert_eq!(s.iteration(), 1);
        for query in &q {
            assert!(s.queried().contains(&query.concept.key));
        }
        assert!(s.pending().is_empty());
        assert!(s.display_score() > 0.0);
    }

    #[test]
    fn empty_batch_keeps_selection() {
        let mut s = Session::start(corpus(), config()).unwrap();
        let before = s.selection().clone();
        s.submit_feedback(FeedbackBatch::default()).unwrap();
        assert_eq!(s.iteration(), 1);
        assert_eq!(s.selection(), &before);
    }

    #[test]
    fn invalid_batch_is_atomic() {
        let mut s = Session::start(corpus(), config()).unwrap();
        s.next_queries(3).unwrap();
        let before = s.clone();
        let batch = FeedbackBatch::new(vec![Feedback::accept("storm", 0.5), Feedback::accept("coast", 1.5)]);
        assert!(matches!(s.submit_feedback(batch), Err(SessionError::Feedback(_))));
        assert_eq!(s, before);
        let batch = FeedbackBatch::new(vec![Feedback::accept("nonexistent", 0.5)]);
        assert!(matches!(
            s.submit_feedback(batch),
            Err(SessionError::Feedback(FeedbackError::UnknownConcept(_)))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn satisfied_is_final_and_idempotent() {
        let mut s = Session::start(corpus(), config()).unwrap();
        let initial = s.selection().clone();
        s.mark_satisfied();
        let once = s.clone();
        s.mark_satisfied();
        assert_eq!(s, once);
        assert_eq!(s.selection(), &initial);
        assert_eq!(s.termination(), Some(TerminationReason::UserSatisfied));
        assert!(matches!(s.submit_feedback(FeedbackBatch::default()), Err(SessionError::Terminated(_))));
        assert!(matches!(s.next_queries(1), Err(SessionError::Terminated(_))));
    }

    #[test]
    fn max_iterations_terminates() {
        let cfg = SessionConfig { max_iterations: 2, query_batch_size: 1, ..config() };
        let mut s = Session::start(corpus(), cfg).unwrap();
        for _ in 0..2 {
            let q = s.next_queries(1).unwrap();
            s.submit_feedback(FeedbackBatch::new(vec![Feedback::reject(q[0].concept.key.clone(), 0.5)])).unwrap();
        }
        assert_eq!(s.termination(), Some(TerminationReason::MaxIterations));
    }

    #[test]
    fn rejecting_sentences_excludes_them() {
        let mut s = Session::start(corpus(), config()).unwrap();
        let chosen = s.selection().sent_ids.clone();
        let batch = FeedbackBatch { feedback: vec![], reject_sentences: chosen.clone() };
        s.submit_feedback(batch).unwrap();
        assert!(chosen.iter().all(|c| !s.selection().sent_ids.contains(c)));
    }

    #[test]
    fn amend_budget_resolves() {
        let mut s = Session::start(corpus(), config()).unwrap();
        s.amend_budget(Budget::sentences(5).unwrap()).unwrap();
        assert_eq!(s.config().budget, Budget::sentences(5).unwrap());
        assert!(s.selection().sent_ids.len() <= 5);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let mut s = Session::start(corpus(), config()).unwrap();
        let q = s.next_queries(2).unwrap();
        s.submit_feedback(FeedbackBatch {
            feedback: vec![Feedback::accept(q[0].concept.key.clone(), 0.75).with_confidence(0.5)],
            reject_sentences: vec![4],
        })
        .unwrap();
        s.amend_budget(Budget::words(9).unwrap()).unwrap();
        s.next_queries(2).unwrap();
        s.save(&path).unwrap();
        let mut loaded = Session::load(&path).unwrap();
        // Pending queries are not persisted until answered.
        s.pending.clear();
        assert_eq!(loaded, s);

        let batch = FeedbackBatch::new(vec![Feedback::reject("schools", 1.0)]);
        let mut fork = s.clone();
        fork.submit_feedback(batch.clone()).unwrap();
        loaded.submit_feedback(batch).unwrap();
        assert_eq!(loaded.selection(), fork.selection());
    }

    #[test]
    fn load_rejects_bad_files() {
        let s = Session::start(corpus(), config()).unwrap();
        let json = s.to_file_json();
        let bumped = json.replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(matches!(Session::from_file_json(&bumped), Err(SessionError::VersionMismatch { .. })));
        let tampered = json.replacen("Mayor urges calm.", "Mayor urges panic.", 1);
        assert!(matches!(Session::from_file_json(&tampered), Err(SessionError::Corrupt(_))));
        assert!(matches!(Session::from_file_json("{"), Err(SessionError::Corrupt(_))));
    }

    #[test]
    fn export_lists_selection_and_weights() {
        let mut s = Session::start(corpus(), config()).unwrap();
        s.submit_feedback(FeedbackBatch::new(vec![Feedback::accept("schools", 1.0)])).unwrap();
        let e = s.export();
        assert_eq!(e.sent_ids, s.selection().sent_ids);
        assert_eq!(e.sentences.len(), e.sent_ids.len());
        let schools = e.weights.iter().find(|w| w.concept == "schools").unwrap();
        assert_eq!((schools.weight, schools.source), (1.0, WeightSource::Labeled));
        assert_eq!(s.summary_text().lines().count(), e.sent_ids.len());
    }

    #[test]
    fn config_validation() {
        let cfg = SessionConfig { query_batch_size: 0, ..config() };
        assert!(matches!(Session::start(corpus(), cfg), Err(SessionError::Config { .. })));
        let cfg = SessionConfig { grouping_threshold: 1.5, ..config() };
        assert!(matches!(Session::start(corpus(), cfg), Err(SessionError::Config { .. })));
    }
}
