use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use super::{in_alphabet, MergeTable};
use crate::corpus::{TokenStream, END_OF_TOKEN};
use crate::error::{Error, Result};

type Pair = (u32, u32);

/// Symbol id that never takes part in a merge (characters outside the alphabet).
const BLOCKED: u32 = u32::MAX;

struct Symbols {
    texts: Vec<Rc<str>>,
    index: HashMap<Rc<str>, u32>,
}

impl Symbols {
    fn intern(&mut self, text: &str) -> u32 {
        if let Some(&id) = self.index.get(text) {
            return id;
        }
        let id = self.texts.len() as u32;
        let rc: Rc<str> = Rc::from(text);
        self.texts.push(rc.clone());
        self.index.insert(rc, id);
        id
    }
}

struct Word {
    symbols: Vec<u32>,
    freq: i64,
}

/// Adjacent pairs of `symbols`, counting runs of one repeated pair left to
/// right without overlap (`a a a a` holds two `(a, a)`).
fn for_each_pair(symbols: &[u32], mut f: impl FnMut(Pair)) {
    let mut prev: Option<Pair> = None;
    for w in symbols.windows(2) {
        let pair = (w[0], w[1]);
        if prev == Some(pair) {
            prev = None;
            continue;
        }
        prev = Some(pair);
        if pair.0 != BLOCKED && pair.1 != BLOCKED {
            f(pair);
        }
    }
}

/// Replaces every non-overlapping occurrence of `pair`, scanning left to right.
pub(crate) fn apply_merge(symbols: &mut Vec<u32>, pair: Pair, merged: u32) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    *symbols = out;
}

struct Candidate {
    count: i64,
    left: Rc<str>,
    right: Rc<str>,
    pair: Pair,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap order: higher count first, then the lexicographically smallest pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

/// Greedy merge learning over token-internal symbol pairs.
///
/// Each step merges the most frequent pair (ties go to the lexicographically
/// smallest `(left, right)`); learning stops after `max_ops` merges or once
/// no pair occurs at least twice.
pub fn learn_merges(corpus: &[TokenStream], max_ops: usize) -> Result<MergeTable> {
    let mut type_counts: BTreeMap<&str, i64> = BTreeMap::new();
    for stream in corpus {
        for token in &stream.tokens {
            *type_counts.entry(token.text.as_str()).or_default() += 1;
        }
    }
    if type_counts.is_empty() {
        return Err(Error::Config("cannot learn merges from an empty corpus".into()));
    }

    let mut symbols = Symbols {
        texts: Vec::new(),
        index: HashMap::new(),
    };
    let eot = symbols.intern(END_OF_TOKEN);
    let mut words: Vec<Word> = type_counts
        .into_iter()
        .map(|(text, freq)| {
            let mut syms: Vec<u32> = text
                .chars()
                .map(|c| {
                    if in_alphabet(c) {
                        symbols.intern(c.encode_utf8(&mut [0; 4]))
                    } else {
                        BLOCKED
                    }
                })
                .collect();
            syms.push(eot);
            Word { symbols: syms, freq }
        })
        .collect();

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_seen: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (wi, word) in words.iter().enumerate() {
        for_each_pair(&word.symbols, |p| {
            *counts.entry(p).or_default() += word.freq;
            where_seen.entry(p).or_default().insert(wi);
        });
    }

    let candidate = |symbols: &Symbols, pair: Pair, count: i64| Candidate {
        count,
        left: symbols.texts[pair.0 as usize].clone(),
        right: symbols.texts[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = counts
        .iter()
        .map(|(&p, &c)| candidate(&symbols, p, c))
        .collect();

    let mut merges = Vec::new();
    while merges.len() < max_ops {
        let Some(best) = heap.pop() else { break };
        if counts.get(&best.pair).copied().unwrap_or(0) != best.count {
            continue;
        }
        if best.count < 2 {
            break;
        }
        let pair = best.pair;
        let merged_text = format!("{}{}", best.left, best.right);
        let merged = symbols.intern(&merged_text);
        merges.push((best.left.to_string(), best.right.to_string()));

        let mut touched: HashSet<Pair> = HashSet::new();
        let mut affected: Vec<usize> = where_seen.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for wi in affected {
            let word = &mut words[wi];
            let freq = word.freq;
            for_each_pair(&word.symbols, |p| {
                *counts.get_mut(&p).expect("counted pair") -= freq;
                touched.insert(p);
            });
            apply_merge(&mut word.symbols, pair, merged);
            for_each_pair(&word.symbols, |p| {
                *counts.entry(p).or_default() += freq;
                where_seen.entry(p).or_default().insert(wi);
                touched.insert(p);
            });
        }
        for p in touched {
            match counts.entry(p) {
                Entry::Occupied(e) if *e.get() <= 0 => {
                    e.remove();
                }
                Entry::Occupied(e) => heap.push(candidate(&symbols, p, *e.get())),
                Entry::Vacant(_) => {}
            }
        }
    }

    MergeTable::new(merges, max_ops)
}
