//! Beam search for the `k` most probable complete tokens after a history.
//!
//! Two ordered queues drive the search: `candidates` holds unit sequences
//! that do not yet end a token, `best` holds the `k` best complete tokens
//! found so far. Each iteration pops the `b` best candidates, extends each
//! by its `b` most probable next units, and routes the extensions to one
//! queue or the other. The search stops when any of these holds:
//!
//! * (a) more than `max_tokens_done` complete tokens have been generated,
//! * (b) their cumulative probability exceeds `max_total`,
//! * (c) more than `max_iters` iterations have run,
//! * (d) the worst kept token is at least as probable as the best candidate.
//!
//! Extending a sequence multiplies its probability by a value at most 1,
//! so once (d) holds nothing better can be found.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::corpus::END_OF_TOKEN;
use crate::error::{Error, Result};
use crate::model::{GruModel, HiddenState};

/// Next-unit distributions over a fixed unit inventory.
pub trait UnitModel {
    type State: Clone;

    fn initial_state(&self) -> Self::State;
    fn predict(&self, state: &Self::State) -> Vec<f64>;
    /// `unit` is always below the inventory size.
    fn advance(&self, state: &Self::State, unit: u32) -> Self::State;
}

impl UnitModel for GruModel {
    type State = HiddenState;

    fn initial_state(&self) -> HiddenState {
        GruModel::initial_state(self)
    }

    fn predict(&self, state: &HiddenState) -> Vec<f64> {
        GruModel::predict(self, state)
    }

    fn advance(&self, state: &HiddenState, unit: u32) -> HiddenState {
        GruModel::advance(self, state, unit).expect("decoder only emits in-vocabulary units")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    pub max_tokens_done: usize,
    pub max_total: f64,
    pub max_iters: usize,
    /// Candidate queue capacity as a multiple of the beam width; `None` is unbounded.
    pub candidate_cap: Option<usize>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_tokens_done: 5000,
            max_total: 0.8,
            max_iters: 7,
            candidate_cap: Some(10),
        }
    }
}

impl SearchLimits {
    /// Only the probability bound (d) can stop the search.
    pub fn disabled() -> Self {
        SearchLimits {
            max_tokens_done: usize::MAX,
            max_total: f64::INFINITY,
            max_iters: usize::MAX,
            candidate_cap: None,
        }
    }
}

impl FromStr for SearchLimits {
    type Err = Error;

    /// `tokens=5000,total=0.8,iters=7,cap=10`; omitted keys keep their defaults,
    /// `none` disables a limit, and the bare word `none` disables all of them.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "none" {
            return Ok(SearchLimits::disabled());
        }
        let mut limits = SearchLimits::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("limit {part:?} is not key=value")))?;
            let off = value == "none";
            let bad = || Error::Config(format!("bad value for limit {key}: {value:?}"));
            match key {
                "tokens" => limits.max_tokens_done = if off { usize::MAX } else { value.parse().map_err(|_| bad())? },
                "total" => limits.max_total = if off { f64::INFINITY } else { value.parse().map_err(|_| bad())? },
                "iters" => limits.max_iters = if off { usize::MAX } else { value.parse().map_err(|_| bad())? },
                "cap" => limits.candidate_cap = if off { None } else { Some(value.parse().map_err(|_| bad())?) },
                other => return Err(Error::Config(format!("unknown limit {other:?}"))),
            }
        }
        Ok(limits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// (a)
    TokensDone,
    /// (b)
    TotalProbability,
    /// (c)
    Iterations,
    /// (d), including an empty candidate queue.
    ProbabilityBound,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::TokensDone => "tokens-done",
            StopReason::TotalProbability => "total-probability",
            StopReason::Iterations => "iterations",
            StopReason::ProbabilityBound => "probability-bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchStats {
    pub iterations: usize,
    pub tokens_done: usize,
    pub total: f64,
    pub stop: StopReason,
    /// Longest unit sequence generated, in units.
    pub max_depth: usize,
    /// Model evaluations performed for expansions.
    pub expansions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// Token text without the end-of-token marker.
    pub text: String,
    pub prob: f64,
    pub units: Vec<u32>,
}

/// At most `k` complete tokens, most probable first, ties by text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompletionList {
    pub entries: Vec<Completion>,
}

impl CompletionList {
    /// 1-based rank of the first entry whose text equals `truth`.
    pub fn rank_of(&self, truth: &str) -> Option<usize> {
        self.entries.iter().position(|c| c.text == truth).map(|i| i + 1)
    }

    pub fn texts(&self) -> Vec<&str> {
        self.entries.iter().map(|c| c.text.as_str()).collect()
    }
}

/// Queue key: descending probability, then ascending text, then insertion order.
#[derive(Debug, Clone)]
struct Rank {
    prob: f64,
    text: String,
    seq: u64,
}

impl PartialEq for Rank {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rank {}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .prob
            .total_cmp(&self.prob)
            .then_with(|| self.text.cmp(&other.text))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

struct Candidate<S> {
    units: Vec<u32>,
    /// State before the last unit; the expansion consumes that unit.
    parent: Rc<S>,
}

pub struct Decoder<'a, M: UnitModel> {
    model: &'a M,
    units: &'a [String],
    complete: Vec<bool>,
    pub k: usize,
    pub beam: usize,
    pub limits: SearchLimits,
}

impl<'a, M: UnitModel> Decoder<'a, M> {
    /// `units` are the unit texts indexed by id; those ending in `</t>` complete a token.
    pub fn new(model: &'a M, units: &'a [String], k: usize, beam: usize, limits: SearchLimits) -> Result<Self> {
        if k == 0 || beam == 0 {
            return Err(Error::Config(format!("k ({k}) and beam ({beam}) must be at least 1")));
        }
        Ok(Decoder {
            model,
            units,
            complete: units.iter().map(|u| u.ends_with(END_OF_TOKEN)).collect(),
            k,
            beam,
            limits,
        })
    }

    fn text_of(&self, units: &[u32]) -> String {
        let mut text: String = units.iter().map(|&u| self.units[u as usize].as_str()).collect();
        if text.ends_with(END_OF_TOKEN) {
            text.truncate(text.len() - END_OF_TOKEN.len());
        }
        text
    }

    /// Indices of the `n` most probable entries of `dist` among those passing `keep`.
    fn best_units(&self, dist: &[f64], n: usize, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..dist.len()).filter(|&i| keep(i)).collect();
        let by_prob = |a: &usize, b: &usize| {
            dist[*b]
                .total_cmp(&dist[*a])
                .then_with(|| self.units[*a].cmp(&self.units[*b]))
        };
        if ids.len() > n {
            ids.select_nth_unstable_by(n - 1, by_prob);
            ids.truncate(n);
        }
        ids.sort_by(by_prob);
        ids
    }

    /// Top-k complete tokens following the history summarized by `state`.
    pub fn search(&self, state: &M::State) -> (CompletionList, SearchStats) {
        let (k, b) = (self.k, self.beam);
        let cap = self.limits.candidate_cap.map(|c| c.saturating_mul(b));
        let mut seq = 0u64;
        let mut next_seq = || {
            seq += 1;
            seq
        };

        let root = Rc::new(state.clone());
        let dist = self.model.predict(state);
        let mut best: BTreeMap<Rank, Vec<u32>> = BTreeMap::new();
        for u in self.best_units(&dist, k, |i| self.complete[i]) {
            let units = vec![u as u32];
            best.insert(Rank { prob: dist[u], text: self.text_of(&units), seq: next_seq() }, units);
        }
        let mut candidates: BTreeMap<Rank, Candidate<M::State>> = BTreeMap::new();
        for u in self.best_units(&dist, b, |i| !self.complete[i]) {
            let units = vec![u as u32];
            let rank = Rank { prob: dist[u], text: self.text_of(&units), seq: next_seq() };
            candidates.insert(rank, Candidate { units, parent: root.clone() });
        }

        let mut total: f64 = best.keys().map(|r| r.prob).sum();
        let mut tokens_done = 0usize;
        let mut iterations = 0usize;
        let mut expansions = 0usize;
        let mut max_depth = 1usize;

        let stop = loop {
            if tokens_done > self.limits.max_tokens_done {
                break StopReason::TokensDone;
            }
            if total > self.limits.max_total {
                break StopReason::TotalProbability;
            }
            if iterations > self.limits.max_iters {
                break StopReason::Iterations;
            }
            // An unfilled token queue cannot bound the search yet.
            let lowest = if best.len() < k {
                0.0
            } else {
                best.keys().next_back().map_or(0.0, |r| r.prob)
            };
            let highest = candidates.keys().next().map_or(f64::NEG_INFINITY, |r| r.prob);
            if lowest >= highest {
                break StopReason::ProbabilityBound;
            }

            let mut to_expand = Vec::with_capacity(b);
            while to_expand.len() < b {
                match candidates.pop_first() {
                    Some(entry) => to_expand.push(entry),
                    None => break,
                }
            }
            for (rank, cand) in to_expand {
                let last = *cand.units.last().expect("candidates are non-empty");
                let state = Rc::new(self.model.advance(&cand.parent, last));
                let dist = self.model.predict(&state);
                expansions += 1;
                for w in self.best_units(&dist, b, |_| true) {
                    let prob = rank.prob * dist[w];
                    let mut units = cand.units.clone();
                    units.push(w as u32);
                    max_depth = max_depth.max(units.len());
                    let key = Rank { prob, text: self.text_of(&units), seq: next_seq() };
                    if self.complete[w] {
                        best.insert(key, units);
                        if best.len() > k {
                            best.pop_last();
                        }
                        total += prob;
                        tokens_done += 1;
                    } else {
                        candidates.insert(key, Candidate { units, parent: state.clone() });
                        if cap.is_some_and(|c| candidates.len() > c) {
                            candidates.pop_last();
                        }
                    }
                }
            }
            iterations += 1;
        };

        let entries = best
            .into_iter()
            .map(|(rank, units)| Completion { text: rank.text, prob: rank.prob, units })
            .collect();
        let stats = SearchStats { iterations, tokens_done, total, stop, max_depth, expansions };
        (CompletionList { entries }, stats)
    }
}

/// Consumes `history` from the initial state, then searches.
pub fn predict_top_k(
    model: &GruModel,
    units: &[String],
    history: &[u32],
    k: usize,
    beam: usize,
    limits: SearchLimits,
) -> Result<(CompletionList, SearchStats)> {
    let mut state = model.initial_state();
    for &u in history {
        state = model.advance(&state, u)?;
    }
    let decoder = Decoder::new(model, units, k, beam, limits)?;
    Ok(decoder.search(&state))
}
