//! Dense kernels over row-major `f32` parameter blocks with `f64` accumulation.

/// `out[i] += sum_j w[i, j] * x[j]`
pub(crate) fn matvec_add(w: &[f32], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), out.len() * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>();
    }
}

/// `out[j] += sum_i w[i, j] * y[i]`
pub(crate) fn matvec_t_add(w: &[f32], cols: usize, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), y.len() * cols);
    debug_assert_eq!(out.len(), cols);
    for (&yi, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yi == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a as f64 * yi;
        }
    }
}

/// `g[i, j] += y[i] * x[j]`
pub(crate) fn outer_add(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), y.len() * cols);
    for (&yi, row) in y.iter().zip(g.chunks_exact_mut(cols)) {
        if yi == 0.0 {
            continue;
        }
        for (gij, &xj) in row.iter_mut().zip(x) {
            *gij += yi * xj;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax in place.
pub(crate) fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// `-log2 softmax(logits)[target]`, computed in log space.
pub(crate) fn neg_log2_softmax(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    sum.log2() - (logits[target] - max) * std::f64::consts::LOG2_E
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_agree_with_naive_loops() {
        let w: Vec<f32> = (0..6).map(|i| i as f32 - 2.0).collect(); // 2x3
        let x = [1.0, -0.5, 2.0];
        let mut out = vec![0.0; 2];
        matvec_add(&w, 3, &x, &mut out);
        assert_eq!(out, vec![-2.0 * 1.0 + -1.0 * -0.5 + 0.0 * 2.0, 1.0 + 2.0 * -0.5 + 3.0 * 2.0]);

        let y = [1.0, 2.0];
        let mut back = vec![0.0; 3];
        matvec_t_add(&w, 3, &y, &mut back);
        assert_eq!(back, vec![-2.0 + 2.0, -1.0 + 4.0, 0.0 + 6.0]);

        let mut g = vec![0.0; 6];
        outer_add(&mut g, &y, &x);
        assert_eq!(g, vec![1.0, -0.5, 2.0, 2.0, -1.0, 4.0]);
    }

    #[test]
    fn softmax_is_stable() {
        let mut l = vec![1000.0, 1000.0];
        softmax(&mut l);
        assert_eq!(l, vec![0.5, 0.5]);
        assert!((sigmoid(-800.0)).is_finite());
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_space_cost() {
        assert_eq!(neg_log2_softmax(&[0.0; 3], 1), 3f64.log2());
        assert!(neg_log2_softmax(&[0.0, 2000.0], 0).is_finite());
        let mut p = vec![0.3, -1.2, 2.5];
        let cost = neg_log2_softmax(&p, 1);
        softmax(&mut p);
        assert!((cost + p[1].log2()).abs() < 1e-12);
    }
}
