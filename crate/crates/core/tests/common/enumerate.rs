use codelm::model::{GruModel, HiddenState};

#[derive(Debug, Clone)]
pub struct Enumerated {
    pub units: Vec<u32>,
    pub text: String,
    pub prob: f64,
}

/// Every complete token reachable in at most `max_depth` units from `state`,
/// with probability multiplied unit by unit along the chain rule.
pub fn complete_tokens(model: &GruModel, state: &HiddenState, units: &[String], max_depth: usize) -> Vec<Enumerated> {
    let mut out = Vec::new();
    let mut frontier = vec![(Vec::<u32>::new(), String::new(), 1.0f64, state.clone())];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for (seq, text, prob, st) in frontier {
            let dist = model.predict(&st);
            for (id, unit) in units.iter().enumerate() {
                let mut s = seq.clone();
                s.push(id as u32);
                let p = prob * dist[id];
                if let Some(stem) = unit.strip_suffix("</t>") {
                    out.push(Enumerated { units: s, text: format!("{text}{stem}"), prob: p });
                } else {
                    let adv = model.advance(&st, id as u32).unwrap();
                    next.push((s, format!("{text}{unit}"), p, adv));
                }
            }
        }
        frontier = next;
    }
    out
}

/// The `k` most probable entries, ties broken by text.
pub fn top_k(mut all: Vec<Enumerated>, k: usize) -> Vec<Enumerated> {
    all.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.text.cmp(&b.text)));
    all.truncate(k);
    all
}

/// Total probability of unit sequences of exactly `depth` units that are not yet complete.
pub fn open_mass(model: &GruModel, state: &HiddenState, units: &[String], depth: usize) -> f64 {
    let mut frontier = vec![(1.0f64, state.clone())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (prob, st) in frontier {
            let dist = model.predict(&st);
            for (id, unit) in units.iter().enumerate() {
                if !unit.ends_with("</t>") {
                    next.push((prob * dist[id], model.advance(&st, id as u32).unwrap()));
                }
            }
        }
        frontier = next;
    }
    frontier.iter().map(|(p, _)| p).sum()
}

/// Runs the decoder with `b = V` and no limits after `history` and compares it
/// with enumeration up to the depth the search reached. Returns that depth.
pub fn check_beam_against_enumeration(
    model: &GruModel,
    units: &[String],
    history: &[u32],
    k: usize,
) -> Result<usize, String> {
    use codelm::decoder::{predict_top_k, SearchLimits, StopReason};

    let mut state = model.initial_state();
    for &u in history {
        state = model.advance(&state, u).unwrap();
    }
    let (list, stats) = predict_top_k(model, units, history, k, units.len(), SearchLimits::disabled()).unwrap();
    if stats.stop != StopReason::ProbabilityBound {
        return Err(format!("stopped by {}", stats.stop));
    }
    let open = units.iter().filter(|u| !u.ends_with("</t>")).count();
    if (open as f64).powi(stats.max_depth as i32) > 4e6 {
        return Err(format!("explored to depth {}, too deep to enumerate", stats.max_depth));
    }
    let want = top_k(complete_tokens(model, &state, units, stats.max_depth), k);
    if list.entries.len() != want.len() {
        return Err(format!("{} results, enumeration has {}", list.entries.len(), want.len()));
    }
    for (i, (got, want)) in list.entries.iter().zip(&want).enumerate() {
        let same_prob = (got.prob - want.prob).abs() <= 1e-12 * want.prob;
        if got.text != want.text || got.units != want.units || !same_prob {
            return Err(format!(
                "rank {}: got {:?} {:e}, enumeration {:?} {:e}",
                i + 1,
                got.text,
                got.prob,
                want.text,
                want.prob
            ));
        }
    }
    Ok(stats.max_depth)
}
