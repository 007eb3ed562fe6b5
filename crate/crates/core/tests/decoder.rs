mod common;

use codelm::decoder::{predict_top_k, Decoder, SearchLimits, StopReason};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::enumerate::{check_beam_against_enumeration, complete_tokens};
use common::fixtures::{constant, fixture_model, fixture_units};

#[test]
fn beam_equals_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut depths = Vec::new();
    for fixture in 0..12u64 {
        let v = 4 + (fixture as usize % 5);
        let model = fixture_model(v, fixture);
        let names = fixture_units(v, &mut rng);
        let history: Vec<u32> = (0..3).map(|_| rng.random_range(0..v as u32)).collect();
        for k in [1, 3, 5] {
            let depth = check_beam_against_enumeration(&model, &names, &history, k)
                .unwrap_or_else(|e| panic!("fixture {fixture}, k {k}: {e}"));
            depths.push(depth);
        }
    }
    assert!(depths.iter().filter(|&&d| d >= 3).count() >= 10, "searches too shallow: {depths:?}");
}

#[test]
fn deeper_tokens_cannot_beat_the_kth_result() {
    for fixture in 0..6u64 {
        let v = 6;
        let model = fixture_model(v, 100 + fixture);
        let names = fixture_units(v, &mut ChaCha8Rng::seed_from_u64(fixture));
        let state = model.initial_state();
        let decoder = Decoder::new(&model, &names, 3, v, SearchLimits::disabled()).unwrap();
        let (list, stats) = decoder.search(&state);
        let kth = list.entries.last().unwrap().prob;
        let deeper = complete_tokens(&model, &state, &names, stats.max_depth + 2);
        let better: Vec<_> = deeper.iter().filter(|e| e.units.len() > stats.max_depth && e.prob > kth).collect();
        assert!(better.is_empty(), "fixture {fixture}: {better:?}");
    }
}

#[test]
fn stops_after_more_than_5000_tokens() {
    let (model, names) = constant(&[0.2 - 1e-8; 5], &[5e-8 / 55.0; 55]);
    let (list, stats) = Decoder::new(&model, &names, 10, 40, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::TokensDone);
    // 175, 875, then 1400 per iteration.
    assert_eq!(stats.iterations, 5);
    assert_eq!(stats.tokens_done, 5250);
    assert_eq!(list.entries.len(), 10);

    let limits = SearchLimits { max_tokens_done: 5250, ..SearchLimits::default() };
    let (_, stats) = Decoder::new(&model, &names, 10, 40, limits).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::TokensDone);
    assert_eq!((stats.iterations, stats.tokens_done), (6, 6650));
}

#[test]
fn stops_once_total_exceeds_point_eight() {
    let (model, names) = constant(&[0.25, 0.25], &[0.5]);
    let (list, stats) = Decoder::new(&model, &names, 10, 10, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::TotalProbability);
    assert_eq!(stats.iterations, 2);
    assert_eq!(stats.total, 0.875);
    assert_eq!(list.entries.len(), 7);

    let limits = SearchLimits { max_total: 0.875, ..SearchLimits::default() };
    let (_, stats) = Decoder::new(&model, &names, 10, 10, limits).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::TotalProbability);
    assert_eq!((stats.iterations, stats.total), (3, 0.9375));
}

#[test]
fn stops_after_more_than_7_iterations() {
    let (model, names) = constant(&[0.5 - 1e-9, 0.5 - 1e-9], &[1e-9, 1e-9]);
    let (_, stats) = Decoder::new(&model, &names, 10, 10, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::Iterations);
    assert_eq!(stats.iterations, 8);
    assert!(stats.tokens_done <= 5000 && stats.total <= 0.8);
}

#[test]
fn stops_when_no_candidate_can_beat_the_kth_token() {
    let (model, names) = constant(&[0.4], &[0.6]);
    let (list, stats) = Decoder::new(&model, &names, 1, 10, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::ProbabilityBound);
    assert_eq!(stats.iterations, 0);
    assert_eq!(list.texts(), vec!["c0"]);

    let (model, names) = constant(&[0.55], &[0.45]);
    let (list, stats) = Decoder::new(&model, &names, 1, 10, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::ProbabilityBound);
    assert_eq!(stats.iterations, 1);
    assert_eq!(list.texts(), vec!["c0"]);
}

#[test]
fn an_unfilled_result_list_never_triggers_the_bound() {
    let (model, names) = constant(&[0.4], &[0.6]);
    let (list, stats) = Decoder::new(&model, &names, 3, 10, SearchLimits::default()).unwrap().search(&());
    assert_eq!(stats.stop, StopReason::TotalProbability);
    assert_eq!(list.texts(), vec!["c0", "o0c0"]);
}

#[test]
fn default_limits_on_a_trained_shape_model() {
    let v = 8;
    let model = fixture_model(v, 5);
    let names = fixture_units(v, &mut ChaCha8Rng::seed_from_u64(5));
    for k in [1, 5, 10] {
        let (list, stats) = predict_top_k(&model, &names, &[1, 2], k, 10, SearchLimits::default()).unwrap();
        assert!(list.entries.len() <= k);
        assert!(stats.iterations <= 8);
        match stats.stop {
            StopReason::TokensDone => assert!(stats.tokens_done > 5000),
            StopReason::TotalProbability => assert!(stats.total > 0.8),
            StopReason::Iterations => assert_eq!(stats.iterations, 8),
            StopReason::ProbabilityBound => {}
        }
        let probs: Vec<f64> = list.entries.iter().map(|e| e.prob).collect();
        assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    }
}
