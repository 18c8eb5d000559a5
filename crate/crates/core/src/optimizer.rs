//! Budgeted sentence selection maximizing signed concept weight.
//!
//! The objective sums effective concept weights over the selected sentences,
//! subject to a total length budget. Two readings of the sum are supported:
//! [`ScoringMode::Coverage`] counts each concept once if any selected sentence
//! contains it; [`ScoringMode::Occurrence`] counts every (sentence, concept)
//! incidence. Rejected sentences are never selectable, and the empty
//! selection is always feasible with score 0.
//!
//! Two solvers are provided. [`solve_exact`] is a depth-first branch and
//! bound over sentence subsets whose bound adds every positive weight still
//! reachable from the undecided sentences. [`solve_greedy`] is the usual
//! cost-benefit greedy for budgeted coverage, compared at the end against the
//! best single sentence.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::ConceptIndex;
use crate::feedback::FeedbackState;

/// Default limit on non-rejected sentences for the exact solver.
pub const DEFAULT_EXACT_CAP: usize = 24;

/// Scores closer than this are treated as tied.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("exact solver supports at most {cap} candidate sentences, instance has {sentences}; use the greedy solver")]
    TooLarge { sentences: usize, cap: usize },
    #[error("budget limit must be at least 1")]
    InvalidBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    Words,
    Sentences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr")]
pub struct Budget {
    mode: BudgetMode,
    limit: usize,
}

#[derive(Deserialize)]
struct BudgetRepr {
    mode: BudgetMode,
    limit: usize,
}

impl TryFrom<BudgetRepr> for Budget {
    type Error = OptimizerError;

    fn try_from(r: BudgetRepr) -> Result<Self, Self::Error> {
        Budget::new(r.mode, r.limit)
    }
}

impl Budget {
    pub fn new(mode: BudgetMode, limit: usize) -> Result<Self, OptimizerError> {
        if limit == 0 {
            return Err(OptimizerError::InvalidBudget);
        }
        Ok(Budget { mode, limit })
    }

    pub fn words(limit: usize) -> Result<Self, OptimizerError> {
        Self::new(BudgetMode::Words, limit)
    }

    pub fn sentences(limit: usize) -> Result<Self, OptimizerError> {
        Self::new(BudgetMode::Sentences, limit)
    }

    pub fn mode(&self) -> BudgetMode {
        self.mode
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Budget consumed by one sentence.
    pub fn cost(&self, index: &ConceptIndex, sent_id: usize) -> usize {
        match self.mode {
            BudgetMode::Words => index.sentence_length(sent_id),
            BudgetMode::Sentences => 1,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            BudgetMode::Words => write!(f, "{} words", self.limit),
            BudgetMode::Sentences => write!(f, "{} sentences", self.limit),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMode {
    /// Each distinct concept counts once if any selected sentence contains it.
    #[default]
    Coverage,
    /// Each (selected sentence, concept) incidence counts.
    Occurrence,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::Coverage => "coverage",
            ScoringMode::Occurrence => "occurrence",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Exact when the instance is within the cap, greedy otherwise.
    #[default]
    Auto,
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub exact_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverKind::Auto,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

/// A chosen set of sentences. `sent_ids` are ascending, which is document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub sent_ids: Vec<usize>,
    pub score: f64,
    pub used_budget: usize,
    pub mode: ScoringMode,
}

impl Selection {
    pub fn empty(mode: ScoringMode) -> Self {
        Selection {
            sent_ids: Vec::new(),
            score: 0.0,
            used_budget: 0,
            mode,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sent_ids.is_empty()
    }
}

/// Effective weight of every concept of `index`, by concept id.
pub fn concept_weights(state: &FeedbackState, index: &ConceptIndex) -> Vec<f64> {
    index.keys().iter().map(|k| state.effective_weight(k)).collect()
}

/// Objective value of a selection.
pub fn score_summary(
    sent_ids: &[usize],
    state: &FeedbackState,
    index: &ConceptIndex,
    mode: ScoringMode,
) -> f64 {
    score_with_weights(sent_ids, &concept_weights(state, index), index, mode)
}

fn score_with_weights(sent_ids: &[usize], weights: &[f64], index: &ConceptIndex, mode: ScoringMode) -> f64 {
    let distinct: BTreeSet<usize> = sent_ids.iter().copied().collect();
    match mode {
        ScoringMode::Coverage => distinct
            .iter()
            .flat_map(|&s| index.concepts_in(s).iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|c| weights[c])
            .sum(),
        ScoringMode::Occurrence => distinct
            .iter()
            .flat_map(|&s| index.concepts_in(s).iter().map(|&c| weights[c]))
            .sum(),
    }
}

/// `true` when `(a_score, a)` beats `(b_score, b)`: higher score, then fewer
/// sentences, then the lexicographically smaller id sequence.
fn better(a_score: f64, a: &[usize], b_score: f64, b: &[usize]) -> bool {
    if a_score > b_score + TIE_EPS {
        return true;
    }
    if a_score < b_score - TIE_EPS {
        return false;
    }
    match a.len().cmp(&b.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a < b,
    }
}

struct Instance<'a> {
    index: &'a ConceptIndex,
    weights: Vec<f64>,
    /// Non-rejected sentences that fit the budget on their own, ascending.
    candidates: Vec<usize>,
    costs: Vec<usize>,
    limit: usize,
    mode: ScoringMode,
}

impl<'a> Instance<'a> {
    fn new(state: &FeedbackState, index: &'a ConceptIndex, budget: Budget, mode: ScoringMode) -> Self {
        let costs: Vec<usize> = (0..index.num_sentences()).map(|s| budget.cost(index, s)).collect();
        let candidates = (0..index.num_sentences())
            .filter(|&s| !state.is_rejected(s) && costs[s] <= budget.limit())
            .collect();
        Instance {
            index,
            weights: concept_weights(state, index),
            candidates,
            costs,
            limit: budget.limit(),
            mode,
        }
    }

    fn selection(&self, mut sent_ids: Vec<usize>) -> Selection {
        sent_ids.sort_unstable();
        sent_ids.dedup();
        Selection {
            score: score_with_weights(&sent_ids, &self.weights, self.index, self.mode),
            used_budget: sent_ids.iter().map(|&s| self.costs[s]).sum(),
            sent_ids,
            mode: self.mode,
        }
    }

    /// Gain of adding `s` given per-concept cover counts.
    fn gain(&self, s: usize, covered: &[u32]) -> f64 {
        let concepts = self.index.concepts_in(s).iter();
        match self.mode {
            ScoringMode::Coverage => concepts.filter(|&&c| covered[c] == 0).map(|&c| self.weights[c]).sum(),
            ScoringMode::Occurrence => concepts.map(|&c| self.weights[c]).sum(),
        }
    }
}

fn non_rejected(state: &FeedbackState, index: &ConceptIndex) -> usize {
    (0..index.num_sentences()).filter(|&s| !state.is_rejected(s)).count()
}

/// Globally optimal selection by branch and bound.
///
/// Errors when more than `cap` sentences are not rejected.
pub fn solve_exact(
    state: &FeedbackState,
    index: &ConceptIndex,
    budget: Budget,
    mode: ScoringMode,
    cap: usize,
) -> Result<Selection, OptimizerError> {
    let sentences = non_rejected(state, index);
    if sentences > cap {
        return Err(OptimizerError::TooLarge { sentences, cap });
    }
    let inst = Instance::new(state, index, budget, mode);
    let mut search = Search {
        covered: vec![0; index.len()],
        stamp: vec![0; index.len()],
        epoch: 0,
        current: Vec::new(),
        current_score: 0.0,
        used: 0,
        best: Vec::new(),
        best_score: 0.0,
        inst: &inst,
    };
    search.visit(0);
    let best = std::mem::take(&mut search.best);
    Ok(inst.selection(best))
}

struct Search<'i, 'a> {
    inst: &'i Instance<'a>,
    covered: Vec<u32>,
    // Scratch marks for the coverage bound.
    stamp: Vec<u64>,
    epoch: u64,
    current: Vec<usize>,
    current_score: f64,
    used: usize,
    best: Vec<usize>,
    best_score: f64,
}

impl Search<'_, '_> {
    fn visit(&mut self, start: usize) {
        if better(self.current_score, &self.current, self.best_score, &self.best) {
            self.best = self.current.clone();
            self.best_score = self.current_score;
        }
        let bound = self.current_score + self.optimistic_gain(start);
        if bound < self.best_score - TIE_EPS {
            return;
        }
        // Every descendant is larger than `current`; at best it ties on score.
        if bound <= self.best_score + TIE_EPS && self.current.len() >= self.best.len() {
            return;
        }
        let inst = self.inst;
        for (j, &s) in inst.candidates.iter().enumerate().skip(start) {
            let cost = self.inst.costs[s];
            if self.used + cost > self.inst.limit {
                continue;
            }
            let gain = self.add(s);
            self.used += cost;
            self.current.push(s);
            self.visit(j + 1);
            self.current.pop();
            self.used -= cost;
            self.remove(s, gain);
        }
    }

    fn add(&mut self, s: usize) -> f64 {
        let gain = self.inst.gain(s, &self.covered);
        for &c in self.inst.index.concepts_in(s) {
            self.covered[c] += 1;
        }
        self.current_score += gain;
        gain
    }

    fn remove(&mut self, s: usize, gain: f64) {
        for &c in self.inst.index.concepts_in(s) {
            self.covered[c] -= 1;
        }
        self.current_score -= gain;
    }

    /// Upper bound on the gain any extension from `start` can add.
    fn optimistic_gain(&mut self, start: usize) -> f64 {
        let inst = self.inst;
        let reachable = inst.candidates[start..]
            .iter()
            .copied()
            .filter(|&s| self.used + inst.costs[s] <= inst.limit);
        match inst.mode {
            ScoringMode::Occurrence => reachable.map(|s| inst.gain(s, &self.covered).max(0.0)).sum(),
            ScoringMode::Coverage => {
                self.epoch += 1;
                let mut total = 0.0;
                for s in reachable {
                    for &c in inst.index.concepts_in(s) {
                        let w = inst.weights[c];
                        if w > 0.0 && self.covered[c] == 0 && self.stamp[c] != self.epoch {
                            self.stamp[c] = self.epoch;
                            total += w;
                        }
                    }
                }
                total
            }
        }
    }
}

/// Cost-benefit greedy selection.
///
/// Repeatedly adds the feasible sentence with the largest gain per unit of
/// cost while some sentence still has positive gain, then returns the better
/// of that set and the best single feasible sentence. Ties go to the smaller
/// `sent_id`.
pub fn solve_greedy(
    state: &FeedbackState,
    index: &ConceptIndex,
    budget: Budget,
    mode: ScoringMode,
) -> Selection {
    let inst = Instance::new(state, index, budget, mode);
    let mut covered = vec![0u32; index.len()];
    let mut chosen = vec![false; index.num_sentences()];
    let mut picked = Vec::new();
    let mut used = 0;
    let mut total = 0.0;
    loop {
        let mut best: Option<(usize, f64, f64)> = None;
        for &s in &inst.candidates {
            if chosen[s] || used + inst.costs[s] > inst.limit {
                continue;
            }
            let gain = inst.gain(s, &covered);
            if gain <= TIE_EPS {
                continue;
            }
            let ratio = gain / inst.costs[s] as f64;
            if best.is_none_or(|(_, r, _)| ratio > r) {
                best = Some((s, ratio, gain));
            }
        }
        let Some((s, _, gain)) = best else { break };
        chosen[s] = true;
        used += inst.costs[s];
        total += gain;
        for &c in index.concepts_in(s) {
            covered[c] += 1;
        }
        picked.push(s);
    }

    let empty = vec![0u32; index.len()];
    let single = inst
        .candidates
        .iter()
        .map(|&s| (s, inst.gain(s, &empty)))
        .fold(None::<(usize, f64)>, |acc, (s, g)| match acc {
            Some((_, bg)) if g <= bg => acc,
            _ => Some((s, g)),
        });
    match single {
        Some((s, g)) if g > total + TIE_EPS => inst.selection(vec![s]),
        _ => inst.selection(picked),
    }
}

/// Dispatches to a solver. `Auto` uses the exact solver when the number of
/// non-rejected sentences is within `config.exact_cap`.
pub fn solve(
    state: &FeedbackState,
    index: &ConceptIndex,
    budget: Budget,
    mode: ScoringMode,
    config: SolverConfig,
) -> Result<Selection, OptimizerError> {
    match config.kind {
        SolverKind::Exact => solve_exact(state, index, budget, mode, config.exact_cap),
        SolverKind::Greedy => Ok(solve_greedy(state, index, budget, mode)),
        SolverKind::Auto => {
            if non_rejected(state, index) <= config.exact_cap {
                solve_exact(state, index, budget, mode, config.exact_cap)
            } else {
                Ok(solve_greedy(state, index, budget, mode))
            }
        }
    }
}
