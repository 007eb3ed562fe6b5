use codelm::model::{GruModel, HiddenState, ParamGroup};

/// Mean per-unit loss in nats over windows, via the inference forward pass.
pub fn mean_loss(model: &GruModel, windows: &[(HiddenState, Vec<u32>)]) -> f64 {
    let mut total_bits = 0.0;
    let mut n = 0usize;
    for (start, units) in windows {
        let (nll, _) = model.sequence_nll_from(start, units).unwrap();
        total_bits += nll.iter().sum::<f64>();
        n += units.len();
    }
    total_bits * std::f64::consts::LN_2 / n as f64
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub group: ParamGroup,
    pub checked: usize,
    pub worst_rel: f64,
    pub failures: usize,
}

/// Central differences for every parameter, compared element-wise against
/// `analytic` with `|a - n| <= rtol * max(|a|, |n|) + atol`.
pub fn check_all_groups(
    model: &GruModel,
    windows: &[(HiddenState, Vec<u32>)],
    analytic: &[f64],
    step: f32,
    rtol: f64,
    atol: f64,
) -> Vec<GroupReport> {
    let mut probe = model.clone();
    let layout = model.layout().clone();
    ParamGroup::ALL
        .iter()
        .map(|&group| {
            let mut report = GroupReport { group, checked: 0, worst_rel: 0.0, failures: 0 };
            for i in layout.range(group) {
                let original = probe.params()[i];
                let plus = original + step;
                let minus = original - step;
                probe.params_mut()[i] = plus;
                let lp = mean_loss(&probe, windows);
                probe.params_mut()[i] = minus;
                let lm = mean_loss(&probe, windows);
                probe.params_mut()[i] = original;
                // The f32 perturbations are exact in f64, so divide by their true spacing.
                let numeric = (lp - lm) / (plus as f64 - minus as f64);
                let a = analytic[i];
                let scale = a.abs().max(numeric.abs());
                let err = (a - numeric).abs();
                if scale > atol {
                    report.worst_rel = report.worst_rel.max(err / scale);
                }
                if err > rtol * scale + atol {
                    report.failures += 1;
                }
                report.checked += 1;
            }
            report
        })
        .collect()
}
