//! Truncated backpropagation through time and plain SGD.

use std::f64::consts::LN_2;

use rand::Rng;

use super::linalg::{matvec_t_add, outer_add, softmax};
use super::{GruModel, HiddenState, Layout, ParamGroup, StepCache};
use crate::error::{Error, Result};

/// A run of consecutive units of one file and the state before its first unit.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub start: HiddenState,
    pub units: &'a [u32],
}

/// Gradient of the mean per-unit loss, in the model's parameter layout.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn group<'a>(&'a self, layout: &Layout, group: ParamGroup) -> &'a [f64] {
        &self.values[layout.range(group)]
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Mean cross-entropy per unit before the update, in bits.
    pub loss_bits: f64,
    /// State after each window's last unit, computed with the pre-update weights.
    pub final_states: Vec<HiddenState>,
}

struct Trace {
    unit: u32,
    h_prev: Vec<f64>,
    x: Vec<f64>,
    in_mask: Option<Vec<f64>>,
    out_dropped: Vec<f64>,
    out_mask: Option<Vec<f64>>,
    probs: Vec<f64>,
    step: Option<StepCache>,
}

fn dropout_mask(rng: &mut impl Rng, n: usize, keep: f64) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

impl GruModel {
    /// Mean per-unit loss (nats) and its exact gradient over a batch of windows.
    ///
    /// With `rng` set, dropout masks are drawn for the embedding output and
    /// the state fed to the output projection; recurrent connections are
    /// never dropped. Without it the pass is deterministic and dropout-free.
    pub fn loss_and_gradient<R: Rng>(
        &self,
        batch: &[Window<'_>],
        mut rng: Option<&mut R>,
    ) -> Result<(f64, Gradient, Vec<HiddenState>)> {
        let layout = &self.layout;
        let (e, hd) = (self.config.embed_dim, self.config.hidden_dim);
        let keep = self.config.dropout_keep as f64;
        let use_dropout = keep < 1.0 && rng.is_some();
        let total_units: usize = batch.iter().map(|w| w.units.len()).sum();
        let mut grad = vec![0.0; layout.len()];
        let mut finals = Vec::with_capacity(batch.len());
        if total_units == 0 {
            finals.extend(batch.iter().map(|w| w.start.clone()));
            return Ok((0.0, Gradient { values: grad }, finals));
        }
        let scale = 1.0 / total_units as f64;
        let mut loss = 0.0;

        for window in batch {
            if window.start.0.len() != hd {
                return Err(Error::Config("window start state has the wrong dimension".into()));
            }
            // Forward, keeping every activation.
            let mut traces: Vec<Trace> = Vec::with_capacity(window.units.len());
            let mut h = window.start.0.clone();
            for (t, &u) in window.units.iter().enumerate() {
                self.check_unit(u)?;
                let out_mask = match rng.as_deref_mut() {
                    Some(r) if use_dropout => Some(dropout_mask(r, hd, keep)),
                    _ => None,
                };
                let out_dropped: Vec<f64> = match &out_mask {
                    Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
                    None => h.clone(),
                };
                let mut probs = self.logits(&out_dropped);
                softmax(&mut probs);
                loss -= probs[u as usize].ln();

                let in_mask = match rng.as_deref_mut() {
                    Some(r) if use_dropout => Some(dropout_mask(r, e, keep)),
                    _ => None,
                };
                let mut x: Vec<f64> = self.embedding(u).iter().map(|&v| v as f64).collect();
                if let Some(m) = &in_mask {
                    x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                let step = self.gru_step(&h, &x);
                let h_next = step.h_new.clone();
                let last = t + 1 == window.units.len();
                traces.push(Trace {
                    unit: u,
                    h_prev: std::mem::replace(&mut h, h_next),
                    x,
                    in_mask,
                    out_dropped,
                    out_mask,
                    probs,
                    // The last step only produces the carried state.
                    step: if last { None } else { Some(step) },
                });
            }
            finals.push(HiddenState(h));

            // Backward. `dh` is the gradient w.r.t. the state produced by step t.
            let mut dh = vec![0.0; hd];
            for tr in traces.iter().rev() {
                let mut dh_prev = vec![0.0; hd];
                if let Some(step) = &tr.step {
                    self.gru_backward(tr, step, &dh, &mut dh_prev, &mut grad);
                }
                // Output projection at step t reads h_prev (the state before consuming unit t).
                let mut dlogits = tr.probs.clone();
                dlogits[tr.unit as usize] -= 1.0;
                dlogits.iter_mut().for_each(|d| *d *= scale);
                outer_add(&mut grad[layout.range(ParamGroup::OutputWeight)], &dlogits, &tr.out_dropped);
                for (g, d) in grad[layout.range(ParamGroup::OutputBias)].iter_mut().zip(&dlogits) {
                    *g += d;
                }
                let mut dout = vec![0.0; hd];
                matvec_t_add(self.group(ParamGroup::OutputWeight), hd, &dlogits, &mut dout);
                if let Some(m) = &tr.out_mask {
                    dout.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                for (a, b) in dh_prev.iter_mut().zip(&dout) {
                    *a += b;
                }
                dh = dh_prev;
            }
        }

        Ok((loss * scale, Gradient { values: grad }, finals))
    }

    fn gru_backward(&self, tr: &Trace, step: &StepCache, dh_new: &[f64], dh_prev: &mut [f64], grad: &mut [f64]) {
        let layout = &self.layout;
        let (e, hd) = (self.config.embed_dim, self.config.hidden_dim);
        let h = &tr.h_prev;
        let StepCache { z, r, candidate, .. } = step;

        let mut da_z = vec![0.0; hd];
        let mut da_c = vec![0.0; hd];
        for i in 0..hd {
            dh_prev[i] += dh_new[i] * (1.0 - z[i]);
            da_z[i] = dh_new[i] * (candidate[i] - h[i]) * z[i] * (1.0 - z[i]);
            da_c[i] = dh_new[i] * z[i] * (1.0 - candidate[i] * candidate[i]);
        }

        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        outer_add(&mut grad[layout.range(ParamGroup::CandidateInput)], &da_c, &tr.x);
        outer_add(&mut grad[layout.range(ParamGroup::CandidateRecurrent)], &da_c, &rh);
        add_into(&mut grad[layout.range(ParamGroup::CandidateBias)], &da_c);
        let mut drh = vec![0.0; hd];
        matvec_t_add(self.group(ParamGroup::CandidateRecurrent), hd, &da_c, &mut drh);

        let mut da_r = vec![0.0; hd];
        for i in 0..hd {
            dh_prev[i] += drh[i] * r[i];
            da_r[i] = drh[i] * h[i] * r[i] * (1.0 - r[i]);
        }
        outer_add(&mut grad[layout.range(ParamGroup::ResetInput)], &da_r, &tr.x);
        outer_add(&mut grad[layout.range(ParamGroup::ResetRecurrent)], &da_r, h);
        add_into(&mut grad[layout.range(ParamGroup::ResetBias)], &da_r);

        outer_add(&mut grad[layout.range(ParamGroup::UpdateInput)], &da_z, &tr.x);
        outer_add(&mut grad[layout.range(ParamGroup::UpdateRecurrent)], &da_z, h);
        add_into(&mut grad[layout.range(ParamGroup::UpdateBias)], &da_z);

        matvec_t_add(self.group(ParamGroup::UpdateRecurrent), hd, &da_z, dh_prev);
        matvec_t_add(self.group(ParamGroup::ResetRecurrent), hd, &da_r, dh_prev);

        let mut dx = vec![0.0; e];
        matvec_t_add(self.group(ParamGroup::UpdateInput), e, &da_z, &mut dx);
        matvec_t_add(self.group(ParamGroup::ResetInput), e, &da_r, &mut dx);
        matvec_t_add(self.group(ParamGroup::CandidateInput), e, &da_c, &mut dx);
        if let Some(m) = &tr.in_mask {
            dx.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
        }
        let row = layout.range(ParamGroup::Embedding).start + tr.unit as usize * e;
        add_into(&mut grad[row..row + e], &dx);
    }

    /// One SGD update on the mean per-unit cross-entropy of `batch`.
    ///
    /// The gradient is rescaled to global norm `clip` when it exceeds it.
    /// A non-finite loss or gradient aborts before any parameter changes.
    pub fn sgd_step<R: Rng>(
        &mut self,
        batch: &[Window<'_>],
        lr: f64,
        rng: Option<&mut R>,
        clip: Option<f64>,
    ) -> Result<StepOutcome> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be finite and non-negative")));
        }
        let (loss, grad, final_states) = self.loss_and_gradient(batch, rng)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss} over {} windows", batch.len())));
        }
        let norm = grad.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient norm {norm} (loss {loss})")));
        }
        let factor = match clip {
            Some(c) if norm > c => lr * c / norm,
            _ => lr,
        };
        if factor != 0.0 {
            for (p, g) in self.params.iter_mut().zip(&grad.values) {
                *p -= (factor * g) as f32;
            }
            if !self.is_finite() {
                for (p, g) in self.params.iter_mut().zip(&grad.values) {
                    *p += (factor * g) as f32;
                }
                return Err(Error::NonFinite("parameters overflowed during update".into()));
            }
        }
        Ok(StepOutcome {
            loss_bits: loss / LN_2,
            final_states,
        })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
