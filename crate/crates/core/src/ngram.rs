//! Interpolated n-gram baseline over whole tokens, with an optional file cache.
//!
//! The vocabulary is closed: tokens seen fewer than `cutoff` times in training,
//! and every token unseen in training, share one OOV id. Order-`k`
//! probabilities interpolate the maximum-likelihood estimate with order `k-1`
//! using a single weight `lambda`, and fall back to order `k-1` outright when
//! the context was never seen. The unigram level is add-`delta` smoothed over
//! the vocabulary plus OOV.
//!
//! The cache is a unigram over token ids of the current file. After every
//! token all cached weights decay by `cache_decay` and the token's weight
//! grows by one; the cache distribution is the normalized weights, mixed in
//! with weight `cache_lambda`.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::corpus::TokenStream;
use crate::error::{Error, Result};
use crate::evaluation::{position_budgets_by, EvalReport, FileScore, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramConfig {
    pub order: usize,
    /// Minimum training count for a token to get its own id.
    pub cutoff: usize,
    pub lambda: f64,
    pub delta: f64,
    pub cache_lambda: f64,
    pub cache_decay: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 3,
            cutoff: 2,
            lambda: 0.6,
            delta: 0.5,
            cache_lambda: 0.2,
            cache_decay: 0.99,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("interpolation weight {} is outside [0, 1]", self.lambda)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("smoothing constant {} must be non-negative", self.delta)));
        }
        if !(0.0..1.0).contains(&self.cache_lambda) {
            return Err(Error::Config(format!("cache weight {} is outside [0, 1)", self.cache_lambda)));
        }
        if !(self.cache_decay > 0.0 && self.cache_decay <= 1.0) {
            return Err(Error::Config(format!("cache decay {} is outside (0, 1]", self.cache_decay)));
        }
        Ok(())
    }
}

/// Counts of the tokens following one context.
#[derive(Debug, Clone, Default)]
struct Continuations {
    total: u64,
    next: HashMap<u32, u64>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    config: NgramConfig,
    ids: HashMap<String, u32>,
    names: Vec<String>,
    unigram: Vec<u64>,
    unigram_total: u64,
    /// `contexts[k - 1]` holds contexts of length `k`.
    contexts: Vec<HashMap<Vec<u32>, Continuations>>,
    /// Ids other than OOV, most frequent first, ties by text.
    by_frequency: Vec<u32>,
}

/// Decayed token counts for the current file.
#[derive(Debug, Clone)]
struct Cache {
    decay: f64,
    /// Stored weights are `true weight / scale`.
    weights: HashMap<u32, f64>,
    scale: f64,
    total: f64,
}

impl Cache {
    fn new(decay: f64) -> Self {
        Cache { decay, weights: HashMap::new(), scale: 1.0, total: 0.0 }
    }

    fn prob(&self, id: u32) -> f64 {
        if self.total == 0.0 {
            return 0.0;
        }
        self.weights.get(&id).map_or(0.0, |w| (w * self.scale / self.total).min(1.0))
    }

    fn observe(&mut self, id: u32) {
        self.scale *= self.decay;
        self.total = self.total * self.decay + 1.0;
        *self.weights.entry(id).or_default() += 1.0 / self.scale;
        if self.scale < 1e-200 {
            for w in self.weights.values_mut() {
                *w *= self.scale;
            }
            self.scale = 1.0;
        }
    }
}

/// Per-token bits of one stream and, when requested, the 1-based rank of each
/// true token among the ten best predictions (`None` when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamScore {
    pub bits: Vec<f64>,
    pub ranks: Vec<Option<usize>>,
}

impl NgramModel {
    pub fn train(corpus: &[TokenStream], config: NgramConfig) -> Result<Self> {
        config.validate()?;
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for t in corpus.iter().flat_map(|s| s.texts()) {
            *freq.entry(t).or_default() += 1;
        }
        if freq.is_empty() {
            return Err(Error::Config("n-gram training corpus has no tokens".into()));
        }
        let mut names: Vec<String> = freq
            .iter()
            .filter(|(_, &c)| c >= config.cutoff as u64)
            .map(|(t, _)| t.to_string())
            .collect();
        names.sort();
        let ids: HashMap<String, u32> = names.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let oov = names.len() as u32;

        let mut model = NgramModel {
            config,
            ids,
            names,
            unigram: vec![0; oov as usize + 1],
            unigram_total: 0,
            contexts: vec![HashMap::new(); config.order - 1],
            by_frequency: Vec::new(),
        };
        for stream in corpus {
            let seq = model.encode(stream);
            for (i, &w) in seq.iter().enumerate() {
                model.unigram[w as usize] += 1;
                model.unigram_total += 1;
                for k in 1..config.order.min(i + 1) {
                    let c = model.contexts[k - 1].entry(seq[i - k..i].to_vec()).or_default();
                    c.total += 1;
                    *c.next.entry(w).or_default() += 1;
                }
            }
        }
        let mut by_frequency: Vec<u32> = (0..oov).collect();
        by_frequency.sort_by(|&a, &b| {
            model.unigram[b as usize]
                .cmp(&model.unigram[a as usize])
                .then_with(|| model.names[a as usize].cmp(&model.names[b as usize]))
        });
        model.by_frequency = by_frequency;
        Ok(model)
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    /// Size of the distribution: known tokens plus OOV.
    pub fn symbol_count(&self) -> usize {
        self.names.len() + 1
    }

    pub fn oov_id(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(self.oov_id())
    }

    pub fn encode(&self, stream: &TokenStream) -> Vec<u32> {
        stream.texts().map(|t| self.id(t)).collect()
    }

    fn unigram_prob(&self, w: u32) -> f64 {
        let v = self.symbol_count() as f64;
        let denom = self.unigram_total as f64 + self.config.delta * v;
        if denom == 0.0 {
            return 1.0 / v;
        }
        (self.unigram[w as usize] as f64 + self.config.delta) / denom
    }

    /// Static probability of `w` after `history` (the most recent tokens last).
    pub fn prob(&self, history: &[u32], w: u32) -> f64 {
        let mut p = self.unigram_prob(w);
        let max_ctx = (self.config.order - 1).min(history.len());
        for k in 1..=max_ctx {
            let ctx = &history[history.len() - k..];
            if let Some(c) = self.contexts[k - 1].get(ctx) {
                let ml = c.next.get(&w).copied().unwrap_or(0) as f64 / c.total as f64;
                p = self.config.lambda * ml + (1.0 - self.config.lambda) * p;
            }
        }
        p
    }

    /// The full static distribution over every symbol, OOV last.
    pub fn distribution(&self, history: &[u32]) -> Vec<f64> {
        (0..self.symbol_count() as u32).map(|w| self.prob(history, w)).collect()
    }

    fn mixed(&self, history: &[u32], w: u32, cache: Option<&Cache>) -> f64 {
        let p = self.prob(history, w);
        match cache {
            Some(c) if c.total > 0.0 => {
                (1.0 - self.config.cache_lambda) * p + self.config.cache_lambda * c.prob(w)
            }
            _ => p,
        }
    }

    /// The ten most probable known tokens, ties by text.
    fn top_ten(&self, history: &[u32], cache: Option<&Cache>) -> Vec<u32> {
        // Tokens outside this set score in unigram order, so the ten most
        // frequent of them are the only others that can qualify.
        let mut pool: HashSet<u32> = HashSet::new();
        let max_ctx = (self.config.order - 1).min(history.len());
        for k in 1..=max_ctx {
            if let Some(c) = self.contexts[k - 1].get(&history[history.len() - k..]) {
                pool.extend(c.next.keys().copied());
            }
        }
        if let Some(c) = cache {
            pool.extend(c.weights.keys().copied());
        }
        pool.remove(&self.oov_id());
        let outside: Vec<u32> = self.by_frequency.iter().copied().filter(|w| !pool.contains(w)).take(10).collect();
        let mut scored: Vec<(f64, u32)> =
            pool.into_iter().chain(outside).map(|w| (self.mixed(history, w, cache), w)).collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.names[a.1 as usize].cmp(&self.names[b.1 as usize]))
        });
        scored.truncate(10);
        scored.into_iter().map(|(_, w)| w).collect()
    }

    /// Scores a file from its first token; the cache starts empty.
    /// Ranks are computed for the first `rank_positions` tokens.
    pub fn score(&self, stream: &TokenStream, cache: bool, rank_positions: usize) -> StreamScore {
        let seq = self.encode(stream);
        let mut cache = cache.then(|| Cache::new(self.config.cache_decay));
        let mut bits = Vec::with_capacity(seq.len());
        let mut ranks = Vec::with_capacity(rank_positions.min(seq.len()));
        let window = self.config.order - 1;
        for (i, &w) in seq.iter().enumerate() {
            let history = &seq[i.saturating_sub(window)..i];
            bits.push(-self.mixed(history, w, cache.as_ref()).log2());
            if i < rank_positions {
                let rank = if w == self.oov_id() {
                    None
                } else {
                    self.top_ten(history, cache.as_ref()).iter().position(|&c| c == w).map(|r| r + 1)
                };
                ranks.push(rank);
            }
            if let Some(c) = cache.as_mut() {
                c.observe(w);
            }
        }
        StreamScore { bits, ranks }
    }

    /// Cache probability of `token` at each position of `stream`, before that
    /// position's token is observed.
    pub fn cache_trace(&self, stream: &TokenStream, token: &str) -> Vec<f64> {
        let target = self.id(token);
        let mut cache = Cache::new(self.config.cache_decay);
        self.encode(stream)
            .into_iter()
            .map(|w| {
                let p = cache.prob(target);
                cache.observe(w);
                p
            })
            .collect()
    }
}

/// Scores every test file in the evaluation report format.
pub fn run_ngram(
    model: &NgramModel,
    test: &[TokenStream],
    cache: bool,
    corpus_id: &str,
    with_mrr: bool,
    max_positions: Option<usize>,
) -> EvalReport {
    let budgets = position_budgets_by(test.iter().map(|s| s.tokens.len()), if with_mrr { max_positions } else { Some(0) });
    let files = test
        .par_iter()
        .zip(budgets)
        .map(|(s, n)| {
            let score = model.score(s, cache, n);
            FileScore {
                key: s.path_key(),
                tokens: score.bits.len(),
                bits: score.bits.iter().sum(),
                rr_sum: score.ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum(),
                positions: score.ranks.len(),
            }
        })
        .collect();
    EvalReport::from_files(Scenario::Ngram { cache }, corpus_id, files, with_mrr)
}
