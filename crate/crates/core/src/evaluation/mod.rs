//! Cross-entropy and MRR, the three evaluation scenarios, and test-time adaptation.

mod adapt;
mod scenarios;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

pub use adapt::{adapt_online, AdaptOutcome, AdaptationPolicy};
pub use scenarios::{run_dynamic, run_maintenance, run_static, maintenance_partitions};

use crate::bpe::{SegmentedFile, Vocab};
use crate::decoder::{CompletionList, Decoder, SearchLimits};
use crate::error::{Error, Result};
use crate::model::{GruModel, HiddenState};

/// Per-token bits of `file` starting from `state`, and the state after its last unit.
///
/// A token's cost is the sum of its units' costs. Every entropy in this crate
/// goes through this function.
pub fn file_token_bits(model: &GruModel, state: &HiddenState, file: &SegmentedFile) -> Result<(Vec<f64>, HiddenState)> {
    let (unit_bits, end) = model.sequence_nll_from(state, &file.ids)?;
    let bits = file.token_ranges().map(|r| unit_bits[r].iter().sum()).collect();
    Ok((bits, end))
}

/// Running mean; a constant sequence averages to exactly that constant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Mean {
    value: f64,
    count: usize,
}

impl Mean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.value += (x - self.value) / self.count as f64;
    }

    pub fn merge(&mut self, other: Mean) {
        if other.count == 0 {
            return;
        }
        self.count += other.count;
        self.value += (other.value - self.value) * (other.count as f64 / self.count as f64);
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Mean bits per token over `files`, each scored from the initial state.
pub fn token_cross_entropy(model: &GruModel, files: &[SegmentedFile]) -> Result<f64> {
    let means = files
        .par_iter()
        .map(|f| {
            let (bits, _) = file_token_bits(model, &model.initial_state(), f)?;
            let mut m = Mean::default();
            bits.iter().for_each(|&b| m.push(b));
            Ok(m)
        })
        .collect::<Result<Vec<Mean>>>()?;
    let mut total = Mean::default();
    means.into_iter().for_each(|m| total.merge(m));
    if total.count() == 0 {
        return Err(Error::Config("no tokens to score".into()));
    }
    Ok(total.value())
}

/// `1/rank` of `truth` in `list`, or 0 when absent.
pub fn reciprocal_rank(list: &CompletionList, truth: &str) -> f64 {
    list.rank_of(truth).map_or(0.0, |r| 1.0 / r as f64)
}

/// Mean reciprocal rank over positions; `None` means the truth was not listed.
pub fn mrr(ranks: &[Option<usize>]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let mut per_rank: BTreeMap<usize, usize> = BTreeMap::new();
    for r in ranks.iter().flatten() {
        *per_rank.entry(*r).or_default() += 1;
    }
    let n = ranks.len() as f64;
    per_rank.iter().map(|(&r, &c)| c as f64 / n / r as f64).sum()
}

/// Completion settings for MRR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrrConfig {
    pub k: usize,
    pub beam: usize,
    pub limits: SearchLimits,
    /// Only the first this many token positions, in corpus order, are queried.
    pub max_positions: Option<usize>,
}

impl Default for MrrConfig {
    fn default() -> Self {
        MrrConfig { k: 10, beam: 10, limits: SearchLimits::default(), max_positions: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Static,
    Dynamic,
    Maintenance,
    Ngram { cache: bool },
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Static => "static",
            Scenario::Dynamic => "dynamic",
            Scenario::Maintenance => "maintenance",
            Scenario::Ngram { cache: false } => "ngram",
            Scenario::Ngram { cache: true } => "ngram-cache",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileScore {
    /// `project/file`
    pub key: String,
    pub tokens: usize,
    /// Total bits over the file's tokens.
    pub bits: f64,
    /// Sum of reciprocal ranks over the queried positions.
    pub rr_sum: f64,
    pub positions: usize,
}

impl FileScore {
    pub fn bits_per_token(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.bits / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub corpus_id: String,
    pub bits_per_token: f64,
    /// `None` when completion was not evaluated.
    pub mrr: Option<f64>,
    pub token_count: usize,
    pub mrr_positions: usize,
    pub files: Vec<FileScore>,
}

impl EvalReport {
    /// Aggregates per-file scores, which are kept in the given order.
    pub fn from_files(scenario: Scenario, corpus_id: impl Into<String>, files: Vec<FileScore>, with_mrr: bool) -> Self {
        let token_count: usize = files.iter().map(|f| f.tokens).sum();
        let bits: f64 = files.iter().map(|f| f.bits).sum();
        let mrr_positions: usize = files.iter().map(|f| f.positions).sum();
        let rr: f64 = files.iter().map(|f| f.rr_sum).sum();
        EvalReport {
            scenario,
            corpus_id: corpus_id.into(),
            bits_per_token: if token_count == 0 { 0.0 } else { bits / token_count as f64 },
            mrr: with_mrr.then(|| if mrr_positions == 0 { 0.0 } else { rr / mrr_positions as f64 }),
            token_count,
            mrr_positions,
            files,
        }
    }

    /// Line-oriented text; numbers to four decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.scenario);
        let _ = writeln!(out, "corpus {}", self.corpus_id);
        let _ = writeln!(out, "bits_per_token {:.4}", self.bits_per_token);
        match self.mrr {
            Some(m) => {
                let _ = writeln!(out, "mrr {m:.4}");
            }
            None => out.push_str("mrr -\n"),
        }
        let _ = writeln!(out, "tokens {}", self.token_count);
        let _ = writeln!(out, "mrr_positions {}", self.mrr_positions);
        for f in &self.files {
            let _ = writeln!(out, "file {} {} {:.4}", f.key, f.tokens, f.bits_per_token());
        }
        out
    }
}

/// How many MRR positions each file may use under a corpus-wide cap.
pub(crate) fn position_budgets<'a>(files: impl IntoIterator<Item = &'a SegmentedFile>, cap: Option<usize>) -> Vec<usize> {
    position_budgets_by(files.into_iter().map(SegmentedFile::token_count), cap)
}

pub(crate) fn position_budgets_by(token_counts: impl IntoIterator<Item = usize>, cap: Option<usize>) -> Vec<usize> {
    let mut remaining = cap.unwrap_or(usize::MAX);
    token_counts
        .into_iter()
        .map(|tokens| {
            let n = tokens.min(remaining);
            remaining -= n;
            n
        })
        .collect()
}

/// Scores one file from the initial state: entropy over every token, and MRR
/// over its first `mrr_positions` tokens when `mrr` is set.
pub(crate) fn score_file(
    model: &GruModel,
    vocab: &Vocab,
    file: &SegmentedFile,
    mrr: Option<&MrrConfig>,
    mrr_positions: usize,
) -> Result<FileScore> {
    let mut score = FileScore {
        key: file.path_key(),
        tokens: file.token_count(),
        bits: 0.0,
        rr_sum: 0.0,
        positions: 0,
    };
    let (bits, _) = file_token_bits(model, &model.initial_state(), file)?;
    score.bits = bits.iter().sum();

    let Some(cfg) = mrr else { return Ok(score) };
    if mrr_positions == 0 {
        return Ok(score);
    }
    let truths = file.token_texts(vocab);
    let mut starts = Vec::with_capacity(mrr_positions);
    let mut state = model.initial_state();
    for r in file.token_ranges().take(mrr_positions) {
        starts.push(state.clone());
        for &u in &file.ids[r] {
            state = model.advance(&state, u)?;
        }
    }
    let decoder = Decoder::new(model, vocab.units(), cfg.k, cfg.beam, cfg.limits)?;
    let rr: Vec<f64> = starts
        .par_iter()
        .zip(&truths[..starts.len()])
        .map(|(s, truth)| reciprocal_rank(&decoder.search(s).0, truth))
        .collect();
    score.rr_sum = rr.iter().sum();
    score.positions = starts.len();
    Ok(score)
}

pub(crate) fn check_model(model: &GruModel, vocab: &Vocab) -> Result<()> {
    model.check_vocab(vocab.hash())?;
    if model.vocab_size() != vocab.len() {
        return Err(Error::Config(format!(
            "model predicts {} units but the merge table defines {}",
            model.vocab_size(),
            vocab.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::Completion;
    use crate::model::ModelConfig;

    fn list(texts: &[&str]) -> CompletionList {
        CompletionList {
            entries: texts
                .iter()
                .map(|t| Completion { text: t.to_string(), prob: 0.1, units: vec![] })
                .collect(),
        }
    }

    #[test]
    fn mrr_identities() {
        assert_eq!(mrr(&[Some(2); 7]), 0.5);
        assert_eq!(mrr(&[Some(10); 3]), 0.1);
        assert_eq!(mrr(&[Some(1); 4]), 1.0);
        assert_eq!(mrr(&[None, Some(1)]), 0.5);
        assert_eq!(mrr(&[]), 0.0);
        let l = list(&["x", "y", "z"]);
        assert_eq!(reciprocal_rank(&l, "y"), 0.5);
        assert_eq!(reciprocal_rank(&l, "w"), 0.0);
    }

    fn zeroed_file(units_per_token: usize, tokens: usize) -> (GruModel, SegmentedFile) {
        let m = GruModel::zeroed(ModelConfig::with_dims(4, 2), "h").unwrap();
        let ids: Vec<u32> = (0..tokens * units_per_token).map(|i| (i % 4) as u32).collect();
        let token_ends = (1..=tokens).map(|t| t * units_per_token).collect();
        let f = SegmentedFile { project_id: "p".into(), file_id: "f".into(), ids, token_ends };
        (m, f)
    }

    #[test]
    fn uniform_model_costs_log2_v_per_unit() {
        let (m, f) = zeroed_file(1, 9);
        assert_eq!(token_cross_entropy(&m, &[f]).unwrap(), 2.0);
        let (m, f) = zeroed_file(2, 5);
        assert_eq!(token_cross_entropy(&m, &[f.clone(), f]).unwrap(), 4.0);
    }

    #[test]
    fn mean_of_constants_is_exact() {
        let x = 3f64.log2();
        let mut a = Mean::default();
        (0..37).for_each(|_| a.push(x));
        let mut b = Mean::default();
        (0..11).for_each(|_| b.push(x));
        a.merge(b);
        assert_eq!((a.value(), a.count()), (x, 48));
        let mut c = Mean::default();
        [1.0, 2.0, 6.0].iter().for_each(|&v| c.push(v));
        assert!((c.value() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        let (m, _) = zeroed_file(1, 1);
        assert!(token_cross_entropy(&m, &[]).is_err());
    }

    #[test]
    fn budgets_follow_corpus_order() {
        let (_, a) = zeroed_file(1, 5);
        let (_, b) = zeroed_file(1, 3);
        assert_eq!(position_budgets([&a, &b], Some(6)), vec![5, 1]);
        assert_eq!(position_budgets([&a, &b], None), vec![5, 3]);
    }

    #[test]
    fn report_text() {
        let files = vec![
            FileScore { key: "p/a".into(), tokens: 2, bits: 3.0, rr_sum: 1.5, positions: 2 },
            FileScore { key: "p/b".into(), tokens: 2, bits: 5.0, rr_sum: 0.0, positions: 1 },
        ];
        let r = EvalReport::from_files(Scenario::Static, "demo", files, true);
        assert_eq!(
            r.to_text(),
            "scenario static\ncorpus demo\nbits_per_token 2.0000\nmrr 0.5000\ntokens 4\n\
             mrr_positions 3\nfile p/a 2 1.5000\nfile p/b 2 2.5000\n"
        );
    }
}
