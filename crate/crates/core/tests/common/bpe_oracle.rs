/// Textbook BPE: every iteration recounts all adjacent pairs over every token
/// occurrence (runs of one repeated pair counted without overlap), merges the
/// most frequent pair everywhere, ties to the smallest `(left, right)`.
pub fn brute_force_merges(tokens: &[String], max_ops: usize) -> Vec<(String, String)> {
    let mut words: Vec<Vec<String>> = tokens
        .iter()
        .map(|t| {
            let mut w: Vec<String> = t.chars().map(String::from).collect();
            w.push("</t>".to_string());
            w
        })
        .collect();
    let mut merges = Vec::new();
    while merges.len() < max_ops {
        let mut counts: Vec<((String, String), usize)> = Vec::new();
        for w in &words {
            let mut i = 0;
            let mut prev_counted: Option<(String, String)> = None;
            while i + 1 < w.len() {
                let pair = (w[i].clone(), w[i + 1].clone());
                if prev_counted.as_ref() == Some(&pair) {
                    prev_counted = None;
                } else {
                    match counts.iter_mut().find(|(p, _)| *p == pair) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((pair.clone(), 1)),
                    }
                    prev_counted = Some(pair);
                }
                i += 1;
            }
        }
        let best = counts
            .iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .cloned();
        let Some(((l, r), c)) = best else { break };
        if c < 2 {
            break;
        }
        for w in &mut words {
            let mut out = Vec::new();
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
        merges.push((l, r));
    }
    merges
}
