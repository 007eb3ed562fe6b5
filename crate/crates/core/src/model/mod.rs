//! Single-layer GRU language model over subword units.
//!
//! The model predicts the first unit of a file from the zero state, then
//! alternates: consume a unit (GRU step), predict the next one (softmax over
//! an affine projection of the state). Parameters are stored as one flat
//! `f32` buffer so checkpoints and gradients share a layout; arithmetic runs
//! in `f64`.

mod checkpoint;
mod linalg;
mod train;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use train::{Gradient, StepOutcome, Window};

use crate::error::{Error, Result};
use linalg::{matvec_add, neg_log2_softmax, sigmoid, softmax};

pub const INIT_SCALE: f32 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Probability of keeping an activation under dropout; 1 disables dropout.
    pub dropout_keep: f32,
    pub unroll: usize,
}

impl ModelConfig {
    /// 512-wide embedding and state, dropout 0.5, unroll 200.
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 512,
            hidden_dim: 512,
            dropout_keep: 0.5,
            unroll: 200,
        }
    }

    pub fn with_dims(vocab_size: usize, dim: usize) -> Self {
        ModelConfig {
            embed_dim: dim,
            hidden_dim: dim,
            ..ModelConfig::new(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 || self.unroll == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::Config(format!(
                "dropout keep probability {} outside (0, 1]",
                self.dropout_keep
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.vocab_size, self.embed_dim, self.hidden_dim)
    }
}

/// Parameter blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// V x E, one row per unit.
    Embedding,
    /// H x E
    UpdateInput,
    /// H x H
    UpdateRecurrent,
    UpdateBias,
    ResetInput,
    ResetRecurrent,
    ResetBias,
    CandidateInput,
    CandidateRecurrent,
    CandidateBias,
    /// V x H, one row per unit.
    OutputWeight,
    OutputBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 12] = [
        ParamGroup::Embedding,
        ParamGroup::UpdateInput,
        ParamGroup::UpdateRecurrent,
        ParamGroup::UpdateBias,
        ParamGroup::ResetInput,
        ParamGroup::ResetRecurrent,
        ParamGroup::ResetBias,
        ParamGroup::CandidateInput,
        ParamGroup::CandidateRecurrent,
        ParamGroup::CandidateBias,
        ParamGroup::OutputWeight,
        ParamGroup::OutputBias,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    offsets: [usize; 13],
}

impl Layout {
    fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        let (v, e, h) = (vocab, embed, hidden);
        let sizes = [v * e, h * e, h * h, h, h * e, h * h, h, h * e, h * h, h, v * h, v];
        let mut offsets = [0; 13];
        for (i, s) in sizes.iter().enumerate() {
            offsets[i + 1] = offsets[i] + s;
        }
        Layout { vocab, embed, hidden, offsets }
    }

    pub fn range(&self, group: ParamGroup) -> Range<usize> {
        let i = group as usize;
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn len(&self) -> usize {
        self.offsets[12]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// GRU state after consuming some prefix of units.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub Vec<f64>);

impl HiddenState {
    pub fn zeros(dim: usize) -> Self {
        HiddenState(vec![0.0; dim])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f32>,
    vocab_hash: String,
    /// Learning rate in effect when training finished; seeds adaptation.
    pub final_lr: f64,
}

/// Activations of one GRU step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h_new: Vec<f64>,
}

impl GruModel {
    /// Parameters uniform in `[-0.05, 0.05]`, deterministic in `seed`.
    pub fn init(config: ModelConfig, vocab_hash: impl Into<String>, seed: u64) -> Result<Self> {
        let mut model = GruModel::zeroed(config, vocab_hash)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            *p = rng.random_range(-INIT_SCALE..=INIT_SCALE);
        }
        Ok(model)
    }

    pub fn zeroed(config: ModelConfig, vocab_hash: impl Into<String>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        Ok(GruModel {
            params: vec![0.0; layout.len()],
            layout,
            config,
            vocab_hash: vocab_hash.into(),
            final_lr: 0.1,
        })
    }

    /// Builds a model from a flat parameter vector in [`ParamGroup`] order.
    pub fn from_params(config: ModelConfig, vocab_hash: impl Into<String>, params: Vec<f32>) -> Result<Self> {
        let mut model = GruModel::zeroed(config, vocab_hash)?;
        if params.len() != model.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn group(&self, group: ParamGroup) -> &[f32] {
        &self.params[self.layout.range(group)]
    }

    /// Order-sensitive FNV-1a digest of the raw parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Refuses a model built for a different merge table.
    pub fn check_vocab(&self, vocab_hash: &str) -> Result<()> {
        if self.vocab_hash != vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.vocab_hash.clone(),
                found: vocab_hash.to_owned(),
            });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> HiddenState {
        HiddenState::zeros(self.config.hidden_dim)
    }

    fn check_unit(&self, unit: u32) -> Result<()> {
        if unit as usize >= self.config.vocab_size {
            return Err(Error::UnitOutOfRange {
                id: unit,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    pub(crate) fn embedding(&self, unit: u32) -> &[f32] {
        let e = self.config.embed_dim;
        let start = self.layout.range(ParamGroup::Embedding).start + unit as usize * e;
        &self.params[start..start + e]
    }

    /// Output logits for a (possibly dropped-out) state.
    pub(crate) fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = self.group(ParamGroup::OutputBias).iter().map(|&b| b as f64).collect();
        matvec_add(self.group(ParamGroup::OutputWeight), self.config.hidden_dim, h, &mut logits);
        logits
    }

    pub(crate) fn gru_step(&self, h: &[f64], x: &[f64]) -> StepCache {
        let hd = self.config.hidden_dim;
        let e = self.config.embed_dim;
        let bias = |g| -> Vec<f64> { self.group(g).iter().map(|&b| b as f64).collect() };

        let mut az = bias(ParamGroup::UpdateBias);
        matvec_add(self.group(ParamGroup::UpdateInput), e, x, &mut az);
        matvec_add(self.group(ParamGroup::UpdateRecurrent), hd, h, &mut az);
        let z: Vec<f64> = az.into_iter().map(sigmoid).collect();

        let mut ar = bias(ParamGroup::ResetBias);
        matvec_add(self.group(ParamGroup::ResetInput), e, x, &mut ar);
        matvec_add(self.group(ParamGroup::ResetRecurrent), hd, h, &mut ar);
        let r: Vec<f64> = ar.into_iter().map(sigmoid).collect();

        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let mut ac = bias(ParamGroup::CandidateBias);
        matvec_add(self.group(ParamGroup::CandidateInput), e, x, &mut ac);
        matvec_add(self.group(ParamGroup::CandidateRecurrent), hd, &rh, &mut ac);
        let candidate: Vec<f64> = ac.into_iter().map(f64::tanh).collect();

        let h_new = (0..hd)
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * candidate[i])
            .collect();
        StepCache { z, r, candidate, h_new }
    }

    /// Distribution over the next unit given a state (inference mode).
    pub fn predict(&self, state: &HiddenState) -> Vec<f64> {
        let mut p = self.logits(&state.0);
        softmax(&mut p);
        p
    }

    /// Consumes one unit (inference mode).
    pub fn advance(&self, state: &HiddenState, unit: u32) -> Result<HiddenState> {
        self.check_unit(unit)?;
        let x: Vec<f64> = self.embedding(unit).iter().map(|&v| v as f64).collect();
        Ok(HiddenState(self.gru_step(&state.0, &x).h_new))
    }

    /// Consumes `unit` and returns the distribution over the unit that follows it.
    pub fn forward_step(&self, state: &HiddenState, unit: u32) -> Result<(Vec<f64>, HiddenState)> {
        let next = self.advance(state, unit)?;
        Ok((self.predict(&next), next))
    }

    /// `-log2 p(unit_i | units_<i)` for every unit, starting from the zero state.
    pub fn sequence_nll(&self, units: &[u32]) -> Result<Vec<f64>> {
        self.sequence_nll_from(&self.initial_state(), units).map(|(nll, _)| nll)
    }

    /// Like [`GruModel::sequence_nll`] from an arbitrary state; also returns the final state.
    pub fn sequence_nll_from(&self, state: &HiddenState, units: &[u32]) -> Result<(Vec<f64>, HiddenState)> {
        let mut state = state.clone();
        let mut out = Vec::with_capacity(units.len());
        for &u in units {
            self.check_unit(u)?;
            out.push(neg_log2_softmax(&self.logits(&state.0), u as usize));
            state = self.advance(&state, u)?;
        }
        Ok((out, state))
    }
}
