use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{GruModel, Window};

/// Test-time adaptation: SGD over consecutive windows of a unit stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationPolicy {
    pub unroll: usize,
    pub steps_per_sequence: usize,
    pub lr: f64,
    pub clip: Option<f64>,
    /// Apply the model's training dropout during adaptation steps.
    pub dropout: bool,
    pub seed: u64,
}

impl AdaptationPolicy {
    /// Defaults, with the learning rate the model finished training with.
    pub fn for_model(model: &GruModel) -> Self {
        AdaptationPolicy {
            unroll: 20,
            steps_per_sequence: 1,
            lr: model.final_lr,
            clip: Some(5.0),
            dropout: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.unroll == 0 || self.steps_per_sequence == 0 {
            return Err(Error::Config("adaptation unroll and steps must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("adaptation learning rate {} is invalid", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptOutcome {
    /// Windows whose updates were applied.
    pub windows: usize,
    /// A non-finite loss or gradient stopped adaptation early.
    pub aborted: bool,
}

/// One pass over `units` in windows of `policy.unroll`, carrying the state
/// across windows. A numeric failure stops adaptation and keeps the weights
/// from before the failing step.
pub fn adapt_online(model: &mut GruModel, units: &[u32], policy: &AdaptationPolicy) -> Result<AdaptOutcome> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut state = model.initial_state();
    let mut windows = 0;
    for chunk in units.chunks(policy.unroll) {
        for _ in 0..policy.steps_per_sequence {
            let batch = [Window { start: state.clone(), units: chunk }];
            let rng = policy.dropout.then_some(&mut rng);
            match model.sgd_step(&batch, policy.lr, rng, policy.clip) {
                Ok(out) => {
                    if let Some(s) = out.final_states.into_iter().next() {
                        state = s;
                    }
                }
                Err(Error::NonFinite(_)) => return Ok(AdaptOutcome { windows, aborted: true }),
                Err(e) => return Err(e),
            }
        }
        windows += 1;
    }
    Ok(AdaptOutcome { windows, aborted: false })
}
