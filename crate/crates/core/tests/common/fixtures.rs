//! Small models for decoder tests.

use codelm::decoder::UnitModel;
use codelm::model::{GruModel, ModelConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Same distribution after every prefix.
pub struct Constant {
    pub dist: Vec<f64>,
}

impl UnitModel for Constant {
    type State = ();

    fn initial_state(&self) {}

    fn predict(&self, _: &()) -> Vec<f64> {
        self.dist.clone()
    }

    fn advance(&self, _: &(), _: u32) {}
}

pub fn units(open: usize, complete: usize) -> Vec<String> {
    (0..open)
        .map(|i| format!("o{i}"))
        .chain((0..complete).map(|i| format!("c{i}</t>")))
        .collect()
}

pub fn constant(open: &[f64], complete: &[f64]) -> (Constant, Vec<String>) {
    let dist = open.iter().chain(complete).copied().collect();
    (Constant { dist }, units(open.len(), complete.len()))
}

pub fn fixture_units(v: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let letters = ["a", "b", "c", "d"];
    let mut out: Vec<String> = Vec::new();
    while out.len() < v {
        let l = letters[rng.random_range(0..letters.len())];
        let u = if out.len() % 2 == 0 { format!("{l}</t>") } else { l.to_string() };
        if !out.contains(&u) {
            out.push(u);
        }
    }
    out
}

pub fn fixture_model(v: usize, seed: u64) -> GruModel {
    let config = ModelConfig { dropout_keep: 1.0, ..ModelConfig::with_dims(v, 4) };
    let mut m = GruModel::init(config, "fixture", seed).unwrap();
    for p in m.params_mut() {
        *p *= 20.0;
    }
    m
}
