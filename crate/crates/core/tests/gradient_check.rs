mod common;

use codelm::model::{GruModel, HiddenState, ModelConfig, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::finite_diff::{check_all_groups, mean_loss};

fn fixture(vocab: usize, dim: usize, seed: u64) -> (GruModel, Vec<(HiddenState, Vec<u32>)>) {
    let config = ModelConfig { dropout_keep: 1.0, unroll: 5, ..ModelConfig::with_dims(vocab, dim) };
    let mut model = GruModel::init(config, "fixture", seed).unwrap();
    // Scale the default init up so every gate operates away from its linear region.
    for p in model.params_mut() {
        *p *= 12.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let windows = (0..3)
        .map(|_| {
            let start = HiddenState((0..dim).map(|_| rng.random_range(-0.8..0.8)).collect());
            let units = (0..5).map(|_| rng.random_range(0..vocab as u32)).collect();
            (start, units)
        })
        .collect();
    (model, windows)
}

fn analytic(model: &GruModel, windows: &[(HiddenState, Vec<u32>)]) -> (f64, Vec<f64>) {
    let batch: Vec<Window> = windows
        .iter()
        .map(|(s, u)| Window { start: s.clone(), units: u })
        .collect();
    let (loss, grad, _) = model.loss_and_gradient::<ChaCha8Rng>(&batch, None).unwrap();
    (loss, grad.values)
}

#[test]
fn bptt_matches_central_differences_for_every_group() {
    for seed in [1, 2, 3] {
        let (model, windows) = fixture(12, 8, seed);
        let (loss, grad) = analytic(&model, &windows);
        assert!((loss - mean_loss(&model, &windows)).abs() < 1e-12);
        for r in check_all_groups(&model, &windows, &grad, 1e-3, 1e-3, 1e-8) {
            assert_eq!(r.failures, 0, "seed {seed}: {r:?}");
        }
    }
}

#[test]
fn asymmetric_dimensions() {
    let config = ModelConfig { dropout_keep: 1.0, embed_dim: 3, hidden_dim: 5, ..ModelConfig::new(7) };
    let mut model = GruModel::init(config, "fixture", 4).unwrap();
    for p in model.params_mut() {
        *p *= 15.0;
    }
    let windows = vec![
        (HiddenState(vec![0.1, -0.2, 0.3, 0.0, 0.5]), vec![0, 6, 2, 2, 1, 3]),
        (HiddenState(vec![0.0; 5]), vec![4]),
    ];
    let (_, grad) = analytic(&model, &windows);
    for r in check_all_groups(&model, &windows, &grad, 1e-3, 1e-3, 1e-8) {
        assert_eq!(r.failures, 0, "{r:?}");
    }
}

#[test]
fn dropout_gradient_with_fixed_masks() {
    let config = ModelConfig { dropout_keep: 0.5, unroll: 5, ..ModelConfig::with_dims(6, 4) };
    let mut model = GruModel::init(config, "fixture", 8).unwrap();
    for p in model.params_mut() {
        *p *= 12.0;
    }
    let units = vec![1u32, 5, 0, 3, 3];
    let batch = [Window { start: model.initial_state(), units: &units }];
    let loss_with = |m: &GruModel| {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        m.loss_and_gradient(&batch, Some(&mut rng)).unwrap().0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (_, grad, _) = model.loss_and_gradient(&batch, Some(&mut rng)).unwrap();
    let mut probe = model.clone();
    for i in 0..model.param_count() {
        let orig = probe.params()[i];
        let (plus, minus) = (orig + 1e-3, orig - 1e-3);
        probe.params_mut()[i] = plus;
        let lp = loss_with(&probe);
        probe.params_mut()[i] = minus;
        let lm = loss_with(&probe);
        probe.params_mut()[i] = orig;
        let numeric = (lp - lm) / (plus as f64 - minus as f64);
        let a = grad.values[i];
        let err = (a - numeric).abs();
        assert!(err <= 1e-3 * a.abs().max(numeric.abs()) + 1e-8, "param {i}: {a} vs {numeric}");
    }
}
