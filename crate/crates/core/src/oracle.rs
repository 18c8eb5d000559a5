//! Simulated users for evaluation.
//!
//! The keyword oracle answers from a hand-written table of topic concepts.
//! The reference oracle treats gold summaries as the user's intent: it
//! accepts every concept that occurs in some reference and rejects the rest,
//! always at full weight.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{concept_keys, normalize_key, Concept, ConceptUnit};
use crate::corpus::{split_sentences, tokenize, Corpus};
use crate::feedback::{Action, Feedback, FeedbackBatch};
use crate::rouge::{self, RougeConfig, RougeError, RougeMode, RougeVariant};
use crate::session::{Session, SessionConfig, SessionError, TerminationReason};

/// Weight of the reject given to concepts missing from a keyword table.
pub const ABSENT_REJECT_WEIGHT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no references for cluster {0}")]
    UnknownCluster(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub action: Action,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KeywordRecord {
    cluster: String,
    concept: String,
    action: Action,
    weight: f64,
}

/// Per-cluster concept judgments. Keys are normalized like concept keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordTable {
    clusters: BTreeMap<String, BTreeMap<String, KeywordEntry>>,
}

impl KeywordTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces an entry. Weights must lie in [0, 1].
    pub fn insert(&mut self, cluster: &str, concept: &str, action: Action, weight: f64) -> Result<(), String> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(format!("weight {weight} outside [0, 1]"));
        }
        let key = normalize_key(concept);
        if key.is_empty() {
            return Err("empty concept".into());
        }
        self.clusters
            .entry(cluster.to_string())
            .or_default()
            .insert(key, KeywordEntry { action, weight });
        Ok(())
    }

    /// Parses one `{cluster, concept, action, weight}` record per line.
    pub fn from_jsonl(input: &str, path: &Path) -> Result<Self, OracleError> {
        let mut table = KeywordTable::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| OracleError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let rec: KeywordRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            table
                .insert(&rec.cluster, &rec.concept, rec.action, rec.weight)
                .map_err(malformed)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl(&text, path)
    }

    pub fn entry(&self, cluster: &str, concept_key: &str) -> Option<&KeywordEntry> {
        self.clusters.get(cluster)?.get(concept_key)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &str> {
        self.clusters.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.clusters.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reference summaries by cluster id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    clusters: BTreeMap<String, Vec<String>>,
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cluster: impl Into<String>, references: Vec<String>) {
        self.clusters.insert(cluster.into(), references);
    }

    /// Reads `<dir>/<cluster_id>/ref_*.txt`, references sorted by file name.
    /// Clusters without any reference file are skipped.
    pub fn load_dir(dir: &Path) -> Result<Self, OracleError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| OracleError::Io { path, source }
        };
        let mut set = ReferenceSet::new();
        for entry in fs::read_dir(dir).map_err(io(dir))? {
            let entry = entry.map_err(io(dir))?;
            if !entry.file_type().map_err(io(&entry.path()))?.is_dir() {
                continue;
            }
            let mut files: Vec<PathBuf> = fs::read_dir(entry.path())
                .map_err(io(&entry.path()))?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("ref_") && n.ends_with(".txt"))
                })
                .collect();
            files.sort();
            let mut refs = Vec::with_capacity(files.len());
            for f in &files {
                refs.push(fs::read_to_string(f).map_err(io(f))?.trim().to_string());
            }
            if !refs.is_empty() {
                set.insert(entry.file_name().to_string_lossy().into_owned(), refs);
            }
        }
        Ok(set)
    }

    pub fn get(&self, cluster: &str) -> Result<&[String], OracleError> {
        self.clusters
            .get(cluster)
            .map(Vec::as_slice)
            .ok_or_else(|| OracleError::UnknownCluster(cluster.to_string()))
    }

    pub fn clusters(&self) -> impl Iterator<Item = &str> {
        self.clusters.keys().map(String::as_str)
    }
}

/// Concept keys of a set of texts, extracted the way corpus sentences are.
pub fn reference_concepts(references: &[impl AsRef<str>], unit: ConceptUnit) -> HashSet<String> {
    references
        .iter()
        .flat_map(|r| split_sentences(r.as_ref()))
        .flat_map(|s| concept_keys(&tokenize(&s), unit))
        .collect()
}

/// Table lookup with confidence 1; unlisted concepts get a mild reject.
pub fn keyword_oracle(table: &KeywordTable, cluster: &str, queries: &[Concept]) -> FeedbackBatch {
    FeedbackBatch::new(
        queries
            .iter()
            .map(|q| match table.entry(cluster, &q.key) {
                Some(e) => Feedback::new(q.key.clone(), e.action, e.weight),
                None => Feedback::reject(q.key.clone(), ABSENT_REJECT_WEIGHT),
            })
            .collect(),
    )
}

/// Accepts concepts found in any reference of `cluster`, rejects the rest;
/// both at weight 1 and confidence 1.
pub fn reference_oracle(
    refs: &ReferenceSet,
    cluster: &str,
    queries: &[Concept],
    unit: ConceptUnit,
) -> Result<FeedbackBatch, OracleError> {
    let known = reference_concepts(refs.get(cluster)?, unit);
    Ok(judge_by_membership(&known, queries))
}

fn judge_by_membership(known: &HashSet<String>, queries: &[Concept]) -> FeedbackBatch {
    FeedbackBatch::new(
        queries
            .iter()
            .map(|q| {
                let action = if known.contains(&q.key) { Action::Accept } else { Action::Reject };
                Feedback::new(q.key.clone(), action, 1.0)
            })
            .collect(),
    )
}

/// Anything that can answer a batch of concept queries.
pub trait Oracle: Sync {
    fn answer(&self, queries: &[Concept]) -> FeedbackBatch;
}

impl<F> Oracle for F
where
    F: Fn(&[Concept]) -> FeedbackBatch + Sync,
{
    fn answer(&self, queries: &[Concept]) -> FeedbackBatch {
        self(queries)
    }
}

/// [`keyword_oracle`] bound to one cluster.
pub struct KeywordOracle<'a> {
    table: &'a KeywordTable,
    cluster: String,
}

impl<'a> KeywordOracle<'a> {
    pub fn new(table: &'a KeywordTable, cluster: impl Into<String>) -> Self {
        KeywordOracle { table, cluster: cluster.into() }
    }
}

impl Oracle for KeywordOracle<'_> {
    fn answer(&self, queries: &[Concept]) -> FeedbackBatch {
        keyword_oracle(self.table, &self.cluster, queries)
    }
}

/// [`reference_oracle`] with the reference concepts extracted once.
#[derive(Debug, Clone)]
pub struct ReferenceOracle {
    known: HashSet<String>,
}

impl ReferenceOracle {
    pub fn new(references: &[impl AsRef<str>], unit: ConceptUnit) -> Self {
        ReferenceOracle { known: reference_concepts(references, unit) }
    }

    pub fn knows(&self, key: &str) -> bool {
        self.known.contains(key)
    }
}

impl Oracle for ReferenceOracle {
    fn answer(&self, queries: &[Concept]) -> FeedbackBatch {
        judge_by_membership(&self.known, queries)
    }
}

/// ROUGE-1, ROUGE-2 and ROUGE-L of one summary under one protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeTriple {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

/// Evaluation protocol shared by traces and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RougeProtocol {
    pub mode: RougeMode,
    pub stemming: bool,
}

impl Default for RougeProtocol {
    fn default() -> Self {
        RougeProtocol { mode: RougeMode::LimitedRecall75, stemming: true }
    }
}

impl RougeProtocol {
    pub fn config(&self, variant: RougeVariant) -> RougeConfig {
        RougeConfig::new(variant, self.mode).with_stemming(self.stemming)
    }

    /// The protocol's primary number for each variant.
    pub fn score(&self, candidate: &str, references: &[impl AsRef<str>]) -> Result<RougeTriple, RougeError> {
        let one = |v| rouge::evaluate(candidate, references, &self.config(v)).map(|s| s.primary(self.mode));
        Ok(RougeTriple {
            rouge1: one(RougeVariant::Rouge1)?,
            rouge2: one(RougeVariant::Rouge2)?,
            rouge_l: one(RougeVariant::RougeL)?,
        })
    }
}

/// State after one iteration of a simulated session; iteration 0 is the
/// starting summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    /// Feedback records plus sentence rejections submitted so far.
    pub action_count: usize,
    /// Objective over labeled concepts only.
    pub objective_score: f64,
    pub sent_ids: Vec<usize>,
    pub summary: String,
    /// Absent when no references were supplied.
    pub rouge: Option<RougeTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub cluster_id: String,
    pub rows: Vec<IterationRow>,
    pub termination: Option<TerminationReason>,
}

impl IterationTrace {
    /// Number of feedback iterations performed.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn last(&self) -> &IterationRow {
        self.rows.last().expect("trace has the starting row")
    }
}

fn row(session: &Session, actions: usize, references: &[String], protocol: RougeProtocol) -> Result<IterationRow, RougeError> {
    let summary = session.summary_text();
    let rouge = if references.is_empty() {
        None
    } else {
        Some(protocol.score(&summary, references)?)
    };
    Ok(IterationRow {
        iteration: session.iteration(),
        action_count: actions,
        objective_score: session.display_score(),
        sent_ids: session.selection().sent_ids.clone(),
        summary,
        rouge,
    })
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Rouge(#[from] RougeError),
}

/// Drives a session with `oracle` until it terminates, scoring every
/// iteration's summary against `references` (which may be empty).
pub fn run_simulation(
    corpus: Arc<Corpus>,
    oracle: &dyn Oracle,
    references: &[String],
    config: SessionConfig,
    protocol: RougeProtocol,
) -> Result<IterationTrace, SimulationError> {
    let k = config.query_batch_size;
    let cluster_id = corpus.cluster_id.clone();
    let mut session = Session::start_with_id(format!("sim-{cluster_id}"), corpus, config)?;
    let mut actions = 0;
    let mut rows = vec![row(&session, actions, references, protocol)?];
    while !session.is_terminated() {
        let queries: Vec<Concept> = session.next_queries(k)?.into_iter().map(|q| q.concept).collect();
        let batch = oracle.answer(&queries);
        actions += batch.feedback.len() + batch.reject_sentences.len();
        session.submit_feedback(batch)?;
        rows.push(row(&session, actions, references, protocol)?);
    }
    Ok(IterationTrace {
        cluster_id,
        rows,
        termination: session.termination(),
    })
}
