use std::collections::BTreeSet;

use codelm::bpe::{learn_merges, segment_corpus, MergeTable, Vocab};
use codelm::corpus::{CorpusSplit, TokenStream};
use codelm::dataset::{partition, Partitioned};
use codelm::synth::{generate, lex_all, SynthConfig};

/// A synthetic corpus split by project position: the last `n_test` projects
/// are test, the `n_valid` before them validation, the rest train.
pub struct Desk {
    pub streams: Vec<TokenStream>,
    pub split: CorpusSplit,
    pub table: MergeTable,
    pub vocab: Vocab,
    pub data: Partitioned,
}

impl Desk {
    pub fn build(config: &SynthConfig, n_valid: usize, n_test: usize, ops: usize) -> Desk {
        let streams = lex_all(&generate(config)).unwrap();
        let names: Vec<String> = (0..config.projects).map(|p| format!("proj{p:02}")).collect();
        let n_train = config.projects - n_valid - n_test;
        let set = |r: std::ops::Range<usize>| names[r].iter().cloned().collect::<BTreeSet<_>>();
        let split = CorpusSplit {
            train: set(0..n_train),
            validation: set(n_train..n_train + n_valid),
            test: set(n_train + n_valid..config.projects),
            encoding: BTreeSet::new(),
        };
        let train_streams: Vec<TokenStream> =
            streams.iter().filter(|s| split.train.contains(&s.project_id)).cloned().collect();
        let table = learn_merges(&train_streams, ops).unwrap();
        let vocab = table.vocab();
        let data = partition(segment_corpus(&streams, &table), &split);
        Desk { streams, split, table, vocab, data }
    }

    pub fn streams_in(&self, projects: &BTreeSet<String>) -> Vec<TokenStream> {
        self.streams.iter().filter(|s| projects.contains(&s.project_id)).cloned().collect()
    }

    pub fn bytes(config: &SynthConfig) -> usize {
        generate(config).iter().map(|f| f.source.len()).sum()
    }
}
