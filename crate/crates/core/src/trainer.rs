//! Epoch loop with learning-rate halving and early stopping on validation entropy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bpe::SegmentedFile;
use crate::dataset::{TrainSet, ValidationSet};
use crate::error::{Error, Result};
use crate::evaluation::token_cross_entropy;
use crate::model::{GruModel, HiddenState, Window};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub initial_lr: f64,
    pub max_epochs: usize,
    pub max_halvings: usize,
    pub batch_size: usize,
    pub clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            initial_lr: 0.1,
            max_epochs: 50,
            max_halvings: 4,
            batch_size: 32,
            clip: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial learning rate {} must be positive", self.initial_lr)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// What to do after an epoch's validation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrDecision {
    Keep,
    Halve,
    Stop,
}

/// Halves the rate whenever validation entropy rises against the previous
/// epoch; the increase after `max_halvings` halvings stops training.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    lr: f64,
    max_halvings: usize,
    increases: usize,
    previous: Option<f64>,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, max_halvings: usize) -> Self {
        LrSchedule { lr: initial_lr, max_halvings, increases: 0, previous: None }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn increases(&self) -> usize {
        self.increases
    }

    pub fn observe(&mut self, valid_bits: f64) -> LrDecision {
        let rose = self.previous.is_some_and(|p| valid_bits > p);
        self.previous = Some(valid_bits);
        if !rose {
            return LrDecision::Keep;
        }
        self.increases += 1;
        if self.increases > self.max_halvings {
            LrDecision::Stop
        } else {
            self.lr /= 2.0;
            LrDecision::Halve
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch, bits per unit.
    pub train_loss: f64,
    pub valid_bits: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "epoch={} loss={:.6} valid_bits={:.6} lr={}",
                r.epoch, r.train_loss, r.valid_bits, r.lr
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut fields = [None; 4];
            for part in line.split_whitespace() {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| Error::format("training log", format!("field {part:?} is not key=value")))?;
                let slot = match key {
                    "epoch" => 0,
                    "loss" => 1,
                    "valid_bits" => 2,
                    "lr" => 3,
                    _ => return Err(Error::format("training log", format!("unknown field {key:?}"))),
                };
                fields[slot] = Some(value);
            }
            let get = |i: usize, name: &str| {
                fields[i].ok_or_else(|| Error::format("training log", format!("missing {name} in {line:?}")))
            };
            let num = |i: usize, name: &str| -> Result<f64> {
                get(i, name)?
                    .parse()
                    .map_err(|_| Error::format("training log", format!("bad {name} in {line:?}")))
            };
            records.push(EpochRecord {
                epoch: get(0, "epoch")?
                    .parse()
                    .map_err(|_| Error::format("training log", format!("bad epoch in {line:?}")))?,
                train_loss: num(1, "loss")?,
                valid_bits: num(2, "valid_bits")?,
                lr: num(3, "lr")?,
            });
        }
        Ok(TrainLog { records })
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().min_by(|a, b| a.valid_bits.total_cmp(&b.valid_bits))
    }
}

/// Validation bits per token, without touching the parameters.
pub fn validate(model: &GruModel, valid: &ValidationSet) -> Result<f64> {
    token_cross_entropy(model, valid.files())
}

/// One lane of the batch: a file being consumed window by window.
struct Lane {
    file: usize,
    pos: usize,
    state: HiddenState,
}

/// One pass over `files` in the given order: `batch_size` lanes each walk a
/// file in windows of `unroll` units, carrying the state within the file,
/// and take the next queued file when theirs runs out.
fn run_epoch(
    model: &mut GruModel,
    files: &[&SegmentedFile],
    batch_size: usize,
    lr: f64,
    clip: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let unroll = model.config().unroll;
    let mut queue = files.iter().enumerate().filter(|(_, f)| !f.ids.is_empty()).map(|(i, _)| i);
    let mut lanes: Vec<Lane> = Vec::with_capacity(batch_size);
    let (mut loss_sum, mut units_seen) = (0.0, 0usize);
    loop {
        lanes.retain(|l| l.pos < files[l.file].ids.len());
        while lanes.len() < batch_size {
            match queue.next() {
                Some(file) => lanes.push(Lane { file, pos: 0, state: model.initial_state() }),
                None => break,
            }
        }
        if lanes.is_empty() {
            break;
        }
        let batch: Vec<Window<'_>> = lanes
            .iter()
            .map(|l| {
                let ids = &files[l.file].ids;
                let end = (l.pos + unroll).min(ids.len());
                Window { start: l.state.clone(), units: &ids[l.pos..end] }
            })
            .collect();
        let n: usize = batch.iter().map(|w| w.units.len()).sum();
        let out = model.sgd_step(&batch, lr, Some(&mut *rng), clip)?;
        loss_sum += out.loss_bits * n as f64;
        units_seen += n;
        for ((lane, w), state) in lanes.iter_mut().zip(&batch).zip(out.final_states) {
            lane.pos += w.units.len();
            lane.state = state;
        }
    }
    Ok(if units_seen == 0 { 0.0 } else { loss_sum / units_seen as f64 })
}

/// Trains until the schedule stops it and returns the weights with the lowest
/// validation entropy seen, together with the per-epoch log.
///
/// `progress` is called with each record as soon as its epoch finishes.
pub fn train(
    mut model: GruModel,
    train: &TrainSet,
    valid: &ValidationSet,
    schedule: &TrainSchedule,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<(GruModel, TrainLog)> {
    schedule.validate()?;
    if train.unit_count() == 0 {
        return Err(Error::Config("training corpus is empty".into()));
    }
    if valid.token_count() == 0 {
        return Err(Error::Config("validation corpus has no tokens".into()));
    }
    let mut lr_schedule = LrSchedule::new(schedule.initial_lr, schedule.max_halvings);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, GruModel)> = None;
    let mut order: Vec<&SegmentedFile> = train.files().iter().collect();

    for epoch in 1..=schedule.max_epochs {
        let lr = lr_schedule.lr();
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let train_loss = run_epoch(&mut model, &order, schedule.batch_size, lr, schedule.clip, &mut rng)?;
        let valid_bits = validate(&model, valid)?;
        if !valid_bits.is_finite() {
            return Err(Error::NonFinite(format!("validation entropy {valid_bits} after epoch {epoch}")));
        }
        let record = EpochRecord { epoch, train_loss, valid_bits, lr };
        progress(&record);
        log.records.push(record);
        if best.as_ref().is_none_or(|(b, _)| valid_bits < *b) {
            best = Some((valid_bits, model.clone()));
        }
        if lr_schedule.observe(valid_bits) == LrDecision::Stop {
            break;
        }
    }
    let (_, mut best) = best.expect("at least one epoch ran");
    best.final_lr = lr_schedule.lr();
    Ok((best, log))
}
