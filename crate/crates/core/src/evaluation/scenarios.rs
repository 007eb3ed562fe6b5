use rayon::prelude::*;

use super::{adapt_online, check_model, position_budgets, score_file, AdaptationPolicy, EvalReport, FileScore, MrrConfig, Scenario};
use crate::bpe::{SegmentedFile, Vocab};
use crate::dataset::TestSet;
use crate::error::Result;
use crate::model::GruModel;

/// Scores every test file with the fixed model.
pub fn run_static(model: &GruModel, vocab: &Vocab, test: &TestSet, corpus_id: &str, mrr: Option<&MrrConfig>) -> Result<EvalReport> {
    check_model(model, vocab)?;
    let budgets = position_budgets(test.files(), mrr.and_then(|c| c.max_positions));
    let files = test
        .files()
        .par_iter()
        .zip(budgets)
        .map(|(f, n)| score_file(model, vocab, f, mrr, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_files(Scenario::Static, corpus_id, files, mrr.is_some()))
}

/// Per project: each file is scored, then the project's private model copy
/// adapts on it. Every project starts again from `model`.
pub fn run_dynamic(
    model: &GruModel,
    vocab: &Vocab,
    test: &TestSet,
    policy: &AdaptationPolicy,
    corpus_id: &str,
    mrr: Option<&MrrConfig>,
) -> Result<EvalReport> {
    check_model(model, vocab)?;
    policy.validate()?;
    let projects = with_budgets(test, mrr);
    let scored = projects
        .par_iter()
        .map(|files| {
            let mut local = model.clone();
            let mut out = Vec::with_capacity(files.len());
            for &(f, n) in files {
                out.push(score_file(&local, vocab, f, mrr, n)?);
                adapt_online(&mut local, &f.ids, policy)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_files(Scenario::Dynamic, corpus_id, scored.into_iter().flatten().collect(), mrr.is_some()))
}

/// Indices of the files in each of `min(10, n)` round-robin groups.
pub fn maintenance_partitions(n: usize) -> Vec<Vec<usize>> {
    let p = n.min(10);
    (0..p).map(|g| (g..n).step_by(p).collect()).collect()
}

/// Per project and group: a copy of `model` adapts on the project's other
/// files, then scores the group's files.
pub fn run_maintenance(
    model: &GruModel,
    vocab: &Vocab,
    test: &TestSet,
    policy: &AdaptationPolicy,
    corpus_id: &str,
    mrr: Option<&MrrConfig>,
) -> Result<EvalReport> {
    check_model(model, vocab)?;
    policy.validate()?;
    let projects = with_budgets(test, mrr);
    let jobs: Vec<(usize, Vec<usize>)> = projects
        .iter()
        .enumerate()
        .flat_map(|(p, files)| maintenance_partitions(files.len()).into_iter().map(move |g| (p, g)))
        .collect();
    let scored = jobs
        .par_iter()
        .map(|(p, group)| {
            let files = &projects[*p];
            let mut local = model.clone();
            for (i, (f, _)) in files.iter().enumerate() {
                if !group.contains(&i) {
                    adapt_online(&mut local, &f.ids, policy)?;
                }
            }
            group
                .iter()
                .map(|&i| {
                    let (f, n) = files[i];
                    Ok(((*p, i), score_file(&local, vocab, f, mrr, n)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<((usize, usize), FileScore)> = scored.into_iter().flatten().collect();
    all.sort_by_key(|(k, _)| *k);
    let files = all.into_iter().map(|(_, s)| s).collect();
    Ok(EvalReport::from_files(Scenario::Maintenance, corpus_id, files, mrr.is_some()))
}

/// Test files grouped by project, each with its MRR position budget.
fn with_budgets<'a>(test: &'a TestSet, mrr: Option<&MrrConfig>) -> Vec<Vec<(&'a SegmentedFile, usize)>> {
    let mut budgets = position_budgets(test.files(), mrr.and_then(|c| c.max_positions)).into_iter();
    test.projects()
        .into_iter()
        .map(|(_, files)| files.into_iter().map(|f| (f, budgets.next().unwrap_or(0))).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_cover_each_file_once() {
        assert_eq!(maintenance_partitions(1), vec![vec![0]]);
        assert_eq!(maintenance_partitions(3), vec![vec![0], vec![1], vec![2]]);
        let p = maintenance_partitions(23);
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], vec![0, 10, 20]);
        let mut all: Vec<usize> = p.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }
}
