//! Desk-scale experiments: simulated sessions over a grid of concept units,
//! budgets and scoring modes, with line-delimited reports and plot-ready
//! series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::concepts::{ConceptIndex, ConceptUnit};
use crate::corpus::{load_corpus, Corpus, CorpusError, CorpusFormat};
use crate::feedback::FeedbackState;
use crate::optimizer::{self, Budget, OptimizerError, ScoringMode, SolverConfig};
use crate::oracle::{
    run_simulation, IterationRow, KeywordOracle, KeywordTable, Oracle, OracleError, ReferenceOracle,
    ReferenceSet, RougeProtocol, RougeTriple, SimulationError,
};
use crate::ranking::DEFAULT_GROUPING_THRESHOLD;
use crate::rouge::{self, RougeConfig, RougeError, RougeScore};
use crate::session::{SessionConfig, TerminationReason};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Rouge(#[from] RougeError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("the keyword oracle needs a keyword table")]
    MissingKeywords,
    #[error("no reference summaries for cluster {0}")]
    MissingReferences(String),
    #[error("no clusters found in {0}")]
    NoClusters(PathBuf),
}

/// Directory of the bundled mini-corpus.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("mini")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterData {
    pub corpus: Arc<Corpus>,
    /// Possibly empty.
    pub references: Vec<String>,
}

impl ClusterData {
    pub fn id(&self) -> &str {
        &self.corpus.cluster_id
    }
}

/// Clusters with their references and an optional keyword table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clusters: Vec<ClusterData>,
    pub keywords: Option<KeywordTable>,
}

impl Dataset {
    /// Loads `<dir>/corpus/*.jsonl`, `<dir>/refs/<cluster>/ref_*.txt` and
    /// `<dir>/keywords.jsonl`; the last two are optional. Clusters are
    /// ordered by id.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let corpus_dir = dir.join("corpus");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| HarnessError::Io { path, source }
        };
        let mut files: Vec<PathBuf> = fs::read_dir(&corpus_dir)
            .map_err(io(&corpus_dir))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(HarnessError::NoClusters(corpus_dir));
        }
        let refs_dir = dir.join("refs");
        let refs = if refs_dir.is_dir() {
            ReferenceSet::load_dir(&refs_dir)?
        } else {
            ReferenceSet::new()
        };
        let keywords_path = dir.join("keywords.jsonl");
        let keywords = if keywords_path.is_file() {
            Some(KeywordTable::load(&keywords_path)?)
        } else {
            None
        };
        let clusters = files
            .iter()
            .map(|f| {
                let corpus = load_corpus(f, CorpusFormat::Jsonl)?;
                let references = refs.get(&corpus.cluster_id).map(<[String]>::to_vec).unwrap_or_default();
                Ok(ClusterData { corpus: Arc::new(corpus), references })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(Dataset { clusters, keywords })
    }

    pub fn cluster(&self, id: &str) -> Option<&ClusterData> {
        self.clusters.iter().find(|c| c.id() == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Reference,
    Keyword,
}

/// What to run: the grid is units × budgets × scoring modes, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub oracle: OracleKind,
    pub units: Vec<ConceptUnit>,
    pub budgets: Vec<Budget>,
    pub scorings: Vec<ScoringMode>,
    pub rouge: RougeProtocol,
    pub query_batch_size: usize,
    pub max_iterations: usize,
    pub grouping_threshold: f64,
    pub solver: SolverConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            oracle: OracleKind::Reference,
            units: vec![ConceptUnit::Unigram],
            budgets: vec![Budget::words(75).expect("positive")],
            scorings: vec![ScoringMode::Coverage],
            rouge: RougeProtocol::default(),
            query_batch_size: 10,
            max_iterations: 10,
            grouping_threshold: DEFAULT_GROUPING_THRESHOLD,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub unit: ConceptUnit,
    pub budget: Budget,
    pub scoring: ScoringMode,
}

impl ExperimentSpec {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &unit in &self.units {
            for &budget in &self.budgets {
                for &scoring in &self.scorings {
                    out.push(Cell { unit, budget, scoring });
                }
            }
        }
        out
    }

    pub fn session_config(&self, cell: Cell) -> SessionConfig {
        SessionConfig {
            unit: cell.unit,
            budget: cell.budget,
            scoring: cell.scoring,
            query_batch_size: self.query_batch_size,
            max_iterations: self.max_iterations,
            grouping_threshold: self.grouping_threshold,
            solver: self.solver,
        }
    }
}

/// The summary obtained by labeling every concept with the reference oracle
/// at once and solving a single time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub sent_ids: Vec<usize>,
    pub summary: String,
    pub objective: f64,
    pub rouge: RougeTriple,
}

pub fn upper_bound(
    corpus: &Corpus,
    references: &[String],
    cell: Cell,
    solver: SolverConfig,
    protocol: RougeProtocol,
) -> Result<UpperBound, HarnessError> {
    let index = ConceptIndex::build(corpus, cell.unit);
    let oracle = ReferenceOracle::new(references, cell.unit);
    let all: Vec<_> = (0..index.len()).map(|c| index.concept(c)).collect();
    let mut state = FeedbackState::new(corpus.num_sentences());
    state
        .apply_batch(&oracle.answer(&all))
        .expect("oracle feedback is in range");
    let selection = optimizer::solve(&state, &index, cell.budget, cell.scoring, solver)?;
    let summary = selection
        .sent_ids
        .iter()
        .filter_map(|&s| corpus.sentence(s))
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let rouge = protocol.score(&summary, references)?;
    Ok(UpperBound {
        sent_ids: selection.sent_ids,
        summary,
        objective: selection.score,
        rouge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrace {
    pub cluster_id: String,
    pub rows: Vec<IterationRow>,
    pub termination: Option<TerminationReason>,
    /// Present when the cluster has references.
    pub upper_bound: Option<UpperBound>,
}

impl ClusterTrace {
    pub fn final_row(&self) -> &IterationRow {
        self.rows.last().expect("trace has the starting row")
    }

    /// First iteration whose ROUGE-1 reaches `target`.
    pub fn iterations_to_reach(&self, target: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.rouge.is_some_and(|x| x.rouge1 >= target))
            .map(|r| r.iteration)
    }

    /// First iteration within `fraction` of this trace's own final ROUGE-1.
    pub fn iterations_to_fraction_of_final(&self, fraction: f64) -> Option<usize> {
        let last = self.final_row().rouge?.rouge1;
        self.iterations_to_reach(fraction * last)
    }
}

/// Means across clusters at one iteration. Clusters whose session ended
/// earlier contribute their final row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub iteration: usize,
    pub action_count: f64,
    pub objective_score: f64,
    pub rouge: Option<RougeTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    pub clusters: Vec<ClusterTrace>,
    pub series: Vec<SeriesPoint>,
    /// Mean upper-bound ROUGE over clusters that have one.
    pub upper_bound_mean: Option<RougeTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellReport>,
}

fn mean_triple(items: &[RougeTriple]) -> Option<RougeTriple> {
    if items.is_empty() {
        return None;
    }
    let n = items.len() as f64;
    Some(RougeTriple {
        rouge1: items.iter().map(|r| r.rouge1).sum::<f64>() / n,
        rouge2: items.iter().map(|r| r.rouge2).sum::<f64>() / n,
        rouge_l: items.iter().map(|r| r.rouge_l).sum::<f64>() / n,
    })
}

/// Per-iteration means, carrying each cluster's last row forward.
pub fn series(clusters: &[ClusterTrace]) -> Vec<SeriesPoint> {
    let longest = clusters.iter().map(|c| c.rows.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let rows: Vec<&IterationRow> = clusters.iter().map(|c| &c.rows[i.min(c.rows.len() - 1)]).collect();
            let n = rows.len() as f64;
            let rouges: Vec<RougeTriple> = rows.iter().filter_map(|r| r.rouge).collect();
            SeriesPoint {
                iteration: i,
                action_count: rows.iter().map(|r| r.action_count as f64).sum::<f64>() / n,
                objective_score: rows.iter().map(|r| r.objective_score).sum::<f64>() / n,
                rouge: if rouges.len() == rows.len() { mean_triple(&rouges) } else { None },
            }
        })
        .collect()
}

fn run_cluster(
    data: &ClusterData,
    dataset: &Dataset,
    spec: &ExperimentSpec,
    cell: Cell,
) -> Result<ClusterTrace, HarnessError> {
    let config = spec.session_config(cell);
    let trace = match spec.oracle {
        OracleKind::Reference => {
            if data.references.is_empty() {
                return Err(HarnessError::MissingReferences(data.id().to_string()));
            }
            let oracle = ReferenceOracle::new(&data.references, cell.unit);
            run_simulation(data.corpus.clone(), &oracle, &data.references, config, spec.rouge)?
        }
        OracleKind::Keyword => {
            let table = dataset.keywords.as_ref().ok_or(HarnessError::MissingKeywords)?;
            let oracle = KeywordOracle::new(table, data.id());
            run_simulation(data.corpus.clone(), &oracle, &data.references, config, spec.rouge)?
        }
    };
    let upper_bound = if data.references.is_empty() {
        None
    } else {
        Some(upper_bound(&data.corpus, &data.references, cell, spec.solver, spec.rouge)?)
    };
    Ok(ClusterTrace {
        cluster_id: trace.cluster_id,
        rows: trace.rows,
        termination: trace.termination,
        upper_bound,
    })
}

/// Runs every (cell, cluster) pair in parallel; results keep grid and
/// dataset order.
pub fn run_experiment(dataset: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..dataset.clusters.len()).map(move |d| (c, d)))
        .collect();
    let traces = jobs
        .par_iter()
        .map(|&(c, d)| run_cluster(&dataset.clusters[d], dataset, spec, cells[c]))
        .collect::<Result<Vec<_>, _>>()?;
    let mut traces = traces.into_iter();
    let cells = cells
        .into_iter()
        .map(|cell| {
            let clusters: Vec<ClusterTrace> = traces.by_ref().take(dataset.clusters.len()).collect();
            let bounds: Vec<RougeTriple> = clusters.iter().filter_map(|c| c.upper_bound.as_ref().map(|u| u.rouge)).collect();
            CellReport {
                cell,
                series: series(&clusters),
                upper_bound_mean: mean_triple(&bounds),
                clusters,
            }
        })
        .collect();
    Ok(ExperimentReport { spec: spec.clone(), cells })
}

impl ExperimentReport {
    /// One JSON record per line: the spec, then per cell every iteration
    /// row, every upper bound and every series point.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |v: serde_json::Value| {
            out.push_str(&v.to_string());
            out.push('\n');
        };
        push(json!({"record": "experiment", "spec": self.spec}));
        for cell in &self.cells {
            let c = &cell.cell;
            for trace in &cell.clusters {
                for row in &trace.rows {
                    push(json!({
                        "record": "iteration",
                        "unit": c.unit, "budget": c.budget, "scoring": c.scoring,
                        "cluster": trace.cluster_id,
                        "row": row,
                    }));
                }
                push(json!({
                    "record": "termination",
                    "unit": c.unit, "budget": c.budget, "scoring": c.scoring,
                    "cluster": trace.cluster_id,
                    "reason": trace.termination,
                }));
                if let Some(ub) = &trace.upper_bound {
                    push(json!({
                        "record": "upper_bound",
                        "unit": c.unit, "budget": c.budget, "scoring": c.scoring,
                        "cluster": trace.cluster_id,
                        "bound": ub,
                    }));
                }
            }
            for point in &cell.series {
                push(json!({
                    "record": "series",
                    "unit": c.unit, "budget": c.budget, "scoring": c.scoring,
                    "point": point,
                }));
            }
        }
        out
    }

    /// Human-readable table with one line per cell.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<9} {:<14} {:<11} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "unit", "budget", "scoring", "clusters", "iters", "actions", "rouge1", "rouge2", "ub_r1"
        );
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for cell in &self.cells {
            let last = cell.series.last();
            let n = cell.clusters.len().max(1) as f64;
            let iters = cell.clusters.iter().map(|c| c.rows.len() - 1).sum::<usize>() as f64 / n;
            let scoring = match cell.cell.scoring {
                ScoringMode::Coverage => "coverage",
                ScoringMode::Occurrence => "occurrence",
            };
            let _ = writeln!(
                out,
                "{:<9} {:<14} {:<11} {:>8} {:>8.2} {:>8.1} {:>8} {:>8} {:>8}",
                cell.cell.unit.to_string(),
                cell.cell.budget.to_string(),
                scoring,
                cell.clusters.len(),
                iters,
                last.map_or(0.0, |p| p.action_count),
                fmt(last.and_then(|p| p.rouge).map(|r| r.rouge1)),
                fmt(last.and_then(|p| p.rouge).map(|r| r.rouge2)),
                fmt(cell.upper_bound_mean.map(|r| r.rouge1)),
            );
        }
        out
    }
}

/// ROUGE of one candidate per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEval {
    pub cluster: String,
    pub score: RougeScore,
    /// Primary number averaged over single-reference scores.
    pub per_reference_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RougeConfig,
    pub clusters: Vec<ClusterEval>,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub mean_f1: f64,
}

/// Scores `candidates` (cluster id → summary text) against `references`.
pub fn evaluate_candidates(
    candidates: &BTreeMap<String, String>,
    references: &ReferenceSet,
    config: RougeConfig,
) -> Result<EvalReport, HarnessError> {
    let clusters = candidates
        .iter()
        .map(|(cluster, text)| {
            let refs = references.get(cluster)?;
            Ok(ClusterEval {
                cluster: cluster.clone(),
                score: rouge::evaluate(text, refs, &config)?,
                per_reference_mean: rouge::per_reference_mean(text, refs, &config)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let n = clusters.len().max(1) as f64;
    let mean = |f: fn(&RougeScore) -> f64| clusters.iter().map(|c| f(&c.score)).sum::<f64>() / n;
    Ok(EvalReport {
        config,
        mean_recall: mean(|s| s.recall),
        mean_precision: mean(|s| s.precision),
        mean_f1: mean(|s| s.f1),
        clusters,
    })
}
