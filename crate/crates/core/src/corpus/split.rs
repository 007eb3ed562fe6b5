use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::{escape_field, unescape_field};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub validation: f64,
    pub test: f64,
    /// Held-out projects that only the subword encoder learns from.
    pub encoding: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            validation: 0.01,
            test: 0.01,
            encoding: 0.10,
        }
    }
}

/// Pairwise-disjoint project sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusSplit {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub encoding: BTreeSet<String>,
}

impl CorpusSplit {
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (self.validation.len(), self.test.len(), self.encoding.len(), self.train.len())
    }

    /// Role of `project`, if it has one.
    pub fn role_of(&self, project: &str) -> Option<&'static str> {
        self.roles().into_iter().find(|(_, set)| set.contains(project)).map(|(r, _)| r)
    }

    /// Projects with the given role name (`train`, `validation`, `test`, `encoding`).
    pub fn projects(&self, role: &str) -> Result<&BTreeSet<String>> {
        self.roles()
            .into_iter()
            .find(|(r, _)| *r == role)
            .map(|(_, set)| set)
            .ok_or_else(|| Error::Config(format!("unknown split role {role:?}")))
    }

    fn roles(&self) -> [(&'static str, &BTreeSet<String>); 4] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test), ("encoding", &self.encoding)]
    }

    /// `<role> <project>` lines, grouped by role.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (role, set) in self.roles() {
            for p in set {
                out.push_str(role);
                out.push(' ');
                out.push_str(&escape_field(p));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut split = CorpusSplit::default();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: &str| Error::format("split file", format!("line {}: {m}", n + 1));
            let (role, project) = line.split_once(' ').ok_or_else(|| bad("expected `<role> <project>`"))?;
            let project = unescape_field(project)?;
            if split.role_of(&project).is_some() {
                return Err(bad(&format!("project {project:?} listed twice")));
            }
            let set = match role {
                "train" => &mut split.train,
                "validation" => &mut split.validation,
                "test" => &mut split.test,
                "encoding" => &mut split.encoding,
                other => return Err(bad(&format!("unknown role {other:?}"))),
            };
            set.insert(project);
        }
        Ok(split)
    }
}

fn share(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        0
    } else {
        ((n as f64 * fraction).floor() as usize).max(1)
    }
}

/// Assigns whole projects to the four roles. Deterministic for a given seed
/// regardless of the input order.
pub fn split_corpus(projects: &[String], fractions: SplitFractions, seed: u64) -> Result<CorpusSplit> {
    let SplitFractions { validation, test, encoding } = fractions;
    for (name, f) in [("validation", validation), ("test", test), ("encoding", encoding)] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Config(format!("{name} fraction {f} outside [0, 1)")));
        }
    }
    if validation + test + encoding >= 1.0 {
        return Err(Error::Config("split fractions must sum to less than 1".into()));
    }

    let mut ids: Vec<String> = projects.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    if n < 4 {
        return Err(Error::Config(format!("need at least 4 projects to split, got {n}")));
    }

    let (nv, nt, ne) = (share(n, validation), share(n, test), share(n, encoding));
    if nv + nt + ne >= n {
        return Err(Error::Config(format!(
            "{n} projects cannot populate validation={nv}, test={nt}, encoding={ne} and a non-empty train set"
        )));
    }

    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rest = ids.into_iter();
    let mut take = |k: usize| rest.by_ref().take(k).collect::<BTreeSet<_>>();
    let validation = take(nv);
    let test = take(nt);
    let encoding = take(ne);
    let train = take(usize::MAX);
    Ok(CorpusSplit { train, validation, test, encoding })
}
