use std::collections::HashMap;
use std::ops::Range;

use super::learn::apply_merge;
use super::{in_alphabet, MergeTable, SubwordSequence, Vocab};
use crate::corpus::{TokenStream, END_OF_TOKEN};
use crate::error::{Error, Result};
use crate::text::{escape_field, unescape_field};

/// Applies a merge table to tokens.
#[derive(Debug, Clone)]
pub struct Segmenter {
    vocab: Vocab,
    // (left id, right id) -> (merge rank, merged id)
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

impl Segmenter {
    pub fn new(table: &MergeTable) -> Self {
        let vocab = table.vocab();
        let mut ranks = HashMap::new();
        for (rank, (l, r)) in table.merges().iter().enumerate() {
            if let (Some(li), Some(ri)) = (vocab.id(l), vocab.id(r)) {
                let merged = vocab.id(&format!("{l}{r}")).expect("merge result is in the vocabulary");
                ranks.entry((li, ri)).or_insert((rank, merged));
            }
        }
        Segmenter { vocab, ranks }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Unit ids for one token.
    ///
    /// Starts from the characters plus the end-of-token marker and applies the
    /// merges in learning order. Rather than scanning all merges, each round
    /// jumps to the lowest-ranked merge that is applicable and ranks after the
    /// previous one, which visits exactly the merges a sequential pass would
    /// apply.
    pub fn segment(&self, token: &str) -> Vec<u32> {
        let unknown = self.vocab.unknown_id();
        let mut symbols: Vec<u32> = token
            .chars()
            .map(|c| {
                if in_alphabet(c) {
                    self.vocab.id(c.encode_utf8(&mut [0; 4])).unwrap_or(unknown)
                } else {
                    unknown
                }
            })
            .collect();
        symbols.push(self.vocab.end_of_token_id());

        let mut last_rank: Option<usize> = None;
        loop {
            let next = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&(rank, merged)| (rank, (w[0], w[1]), merged)))
                .filter(|(rank, _, _)| last_rank.is_none_or(|last| *rank > last))
                .min_by_key(|(rank, _, _)| *rank);
            match next {
                Some((rank, pair, merged)) => {
                    apply_merge(&mut symbols, pair, merged);
                    last_rank = Some(rank);
                }
                None => break,
            }
        }
        symbols
    }

    pub fn segment_token(&self, token: &str) -> SubwordSequence {
        self.vocab.to_sequence(&self.segment(token))
    }

    pub fn segment_stream(&self, stream: &TokenStream) -> SegmentedFile {
        let mut cache = HashMap::new();
        self.segment_stream_cached(stream, &mut cache)
    }

    fn segment_stream_cached<'a>(
        &self,
        stream: &'a TokenStream,
        cache: &mut HashMap<&'a str, Vec<u32>>,
    ) -> SegmentedFile {
        let mut ids = Vec::new();
        let mut token_ends = Vec::with_capacity(stream.tokens.len());
        for token in &stream.tokens {
            let units = cache
                .entry(token.text.as_str())
                .or_insert_with(|| self.segment(&token.text));
            ids.extend_from_slice(units);
            token_ends.push(ids.len());
        }
        SegmentedFile {
            project_id: stream.project_id.clone(),
            file_id: stream.file_id.clone(),
            ids,
            token_ends,
        }
    }
}

/// A file as unit ids, with the exclusive end index of each token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedFile {
    pub project_id: String,
    pub file_id: String,
    pub ids: Vec<u32>,
    pub token_ends: Vec<usize>,
}

impl SegmentedFile {
    /// Rebuilds token boundaries from the units' end-of-token markers.
    pub fn from_ids(project_id: String, file_id: String, ids: Vec<u32>, vocab: &Vocab) -> Self {
        let token_ends = ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| vocab.is_complete(id))
            .map(|(i, _)| i + 1)
            .collect();
        SegmentedFile { project_id, file_id, ids, token_ends }
    }

    pub fn token_count(&self) -> usize {
        self.token_ends.len()
    }

    /// Unit index range of each token.
    pub fn token_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let starts = std::iter::once(0).chain(self.token_ends.iter().copied());
        starts.zip(self.token_ends.iter().copied()).map(|(s, e)| s..e)
    }

    pub fn path_key(&self) -> String {
        format!("{}/{}", self.project_id, self.file_id)
    }

    pub fn to_sequence(&self, vocab: &Vocab) -> SubwordSequence {
        vocab.to_sequence(&self.ids)
    }

    /// Token texts, reassembled from the units.
    pub fn token_texts(&self, vocab: &Vocab) -> Vec<String> {
        self.token_ranges()
            .map(|r| {
                let mut text: String = self.ids[r].iter().map(|&id| vocab.unit(id)).collect();
                text.truncate(text.len() - END_OF_TOKEN.len());
                text
            })
            .collect()
    }
}

/// Segments every stream, keeping project and file ids.
pub fn segment_corpus(corpus: &[TokenStream], table: &MergeTable) -> Vec<SegmentedFile> {
    let segmenter = Segmenter::new(table);
    let mut cache = HashMap::new();
    corpus
        .iter()
        .map(|s| segmenter.segment_stream_cached(s, &mut cache))
        .collect()
}

/// Segmented-corpus text: one line per file, the `project/file` key followed
/// by the file's units, all fields escaped and space-separated.
pub fn write_segmented_corpus(files: &[SegmentedFile], vocab: &Vocab) -> String {
    let mut out = String::new();
    for f in files {
        out.push_str(&escape_field(&f.path_key()));
        if !f.ids.is_empty() {
            out.push(' ');
            out.push_str(&f.to_sequence(vocab).to_line());
        }
        out.push('\n');
    }
    out
}

/// Parses [`write_segmented_corpus`] output; every unit must be in `vocab`.
pub fn read_segmented_corpus(text: &str, vocab: &Vocab) -> Result<Vec<SegmentedFile>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let bad = |m: String| Error::format("segmented corpus", format!("line {}: {m}", n + 1));
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let key = unescape_field(key)?;
            let (project, file) = key.split_once('/').ok_or_else(|| bad(format!("key {key:?} has no project")))?;
            let seq = SubwordSequence::from_line(rest)?;
            seq.join().map_err(|e| bad(e.to_string()))?;
            let ids = vocab.encode(&seq).map_err(|e| bad(e.to_string()))?;
            Ok(SegmentedFile::from_ids(project.to_owned(), file.to_owned(), ids, vocab))
        })
        .collect()
}
