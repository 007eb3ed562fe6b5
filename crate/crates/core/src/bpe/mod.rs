//! Byte-pair-encoding subword units that never cross token boundaries.
//!
//! Every token is spelled as its characters followed by the end-of-token
//! marker `</t>`; merges are learned and applied inside that spelling only,
//! so a unit ending in `</t>` always closes a token and unit sequences can be
//! joined back into the original token texts.

mod learn;
mod segment;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

pub use learn::learn_merges;
pub use segment::{read_segmented_corpus, segment_corpus, write_segmented_corpus, SegmentedFile, Segmenter};

use crate::corpus::END_OF_TOKEN;
use crate::error::{Error, Result};
use crate::text::{escape_field, unescape_field};

/// Unit standing in for any character outside [`alphabet`].
pub const UNKNOWN_CHAR: &str = "<unk-char>";

const HEADER: &str = "#bpe-v1";

/// The base characters every table can spell: tab and printable ASCII.
///
/// Sanitized corpora are ASCII, so this fixed set makes the vocabulary
/// derivable from the merge list alone.
pub fn alphabet() -> impl Iterator<Item = char> {
    std::iter::once('\t').chain(' '..='~')
}

pub fn in_alphabet(c: char) -> bool {
    c == '\t' || (' '..='~').contains(&c)
}

/// Ordered merge operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    max_ops: usize,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>, max_ops: usize) -> Result<Self> {
        if merges.len() > max_ops {
            return Err(Error::Config(format!(
                "{} merges exceed the budget of {max_ops}",
                merges.len()
            )));
        }
        for (left, right) in &merges {
            if left.is_empty() || right.is_empty() {
                return Err(Error::format("merge table", "empty merge operand"));
            }
            if left.contains(END_OF_TOKEN) {
                return Err(Error::format(
                    "merge table",
                    format!("left operand {left:?} already ends a token"),
                ));
            }
            if right.contains(END_OF_TOKEN) && !right.ends_with(END_OF_TOKEN) {
                return Err(Error::format("merge table", format!("marker inside {right:?}")));
            }
        }
        Ok(MergeTable { merges, max_ops })
    }

    pub fn empty(max_ops: usize) -> Self {
        MergeTable { merges: Vec::new(), max_ops }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn max_ops(&self) -> usize {
        self.max_ops
    }

    /// Base characters, the marker, and every merge result.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        alphabet()
            .map(String::from)
            .chain(std::iter::once(END_OF_TOKEN.to_owned()))
            .chain(self.merges.iter().map(|(l, r)| format!("{l}{r}")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} {}\n", self.max_ops);
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{} {}", escape_field(l), escape_field(r));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("merge table", "missing header"))?;
        let max_ops = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.strip_prefix(' '))
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| Error::format("merge table", format!("bad header {header:?}")))?;
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) => merges.push((unescape_field(l)?, unescape_field(r)?)),
                _ => {
                    return Err(Error::format(
                        "merge table",
                        format!("line {}: expected `<left> <right>`", i + 2),
                    ))
                }
            }
        }
        MergeTable::new(merges, max_ops)
    }

    /// SHA-256 of the serialized table, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn vocab(&self) -> Vocab {
        Vocab::from_table(self)
    }
}

/// Dense unit ids used by the language model.
///
/// Ids are assigned in a fixed order: [`alphabet`] characters, `</t>`, merge
/// results in learning order, then [`UNKNOWN_CHAR`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    units: Vec<String>,
    index: HashMap<String, u32>,
    complete: Vec<bool>,
    hash: String,
}

impl Vocab {
    fn from_table(table: &MergeTable) -> Self {
        let mut vocab = Vocab {
            units: Vec::new(),
            index: HashMap::new(),
            complete: Vec::new(),
            hash: table.content_hash(),
        };
        for c in alphabet() {
            vocab.intern(c.to_string());
        }
        vocab.intern(END_OF_TOKEN.to_owned());
        for (l, r) in &table.merges {
            vocab.intern(format!("{l}{r}"));
        }
        vocab.intern(UNKNOWN_CHAR.to_owned());
        vocab
    }

    fn intern(&mut self, unit: String) -> u32 {
        if let Some(&id) = self.index.get(&unit) {
            return id;
        }
        let id = self.units.len() as u32;
        self.complete.push(unit.ends_with(END_OF_TOKEN));
        self.index.insert(unit.clone(), id);
        self.units.push(unit);
        id
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn id(&self, unit: &str) -> Option<u32> {
        self.index.get(unit).copied()
    }

    pub fn unit(&self, id: u32) -> &str {
        &self.units[id as usize]
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Whether the unit ends a token.
    pub fn is_complete(&self, id: u32) -> bool {
        self.complete[id as usize]
    }

    pub fn unknown_id(&self) -> u32 {
        self.index[UNKNOWN_CHAR]
    }

    pub fn end_of_token_id(&self) -> u32 {
        self.index[END_OF_TOKEN]
    }

    /// Content hash of the merge table this vocabulary was derived from.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn to_sequence(&self, ids: &[u32]) -> SubwordSequence {
        SubwordSequence {
            units: ids.iter().map(|&id| self.unit(id).to_owned()).collect(),
        }
    }

    pub fn encode(&self, seq: &SubwordSequence) -> Result<Vec<u32>> {
        seq.units
            .iter()
            .map(|u| {
                self.id(u)
                    .ok_or_else(|| Error::format("subword sequence", format!("unit {u:?} not in vocabulary")))
            })
            .collect()
    }
}

/// Subword unit texts of one or more consecutive tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubwordSequence {
    pub units: Vec<String>,
}

impl SubwordSequence {
    pub fn new(units: Vec<String>) -> Self {
        SubwordSequence { units }
    }

    /// Indices of units that end a token.
    pub fn token_boundaries(&self) -> Vec<usize> {
        self.units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.ends_with(END_OF_TOKEN))
            .map(|(i, _)| i)
            .collect()
    }

    /// Concatenates the units and splits at every marker.
    pub fn join(&self) -> Result<Vec<String>> {
        join(&self.units)
    }

    /// Parses one line of a segmented-corpus file.
    pub fn from_line(line: &str) -> Result<Self> {
        if line.is_empty() {
            return Ok(SubwordSequence::default());
        }
        let units = line
            .split(' ')
            .map(unescape_field)
            .collect::<Result<Vec<_>>>()?;
        Ok(SubwordSequence { units })
    }

    /// One line of a segmented-corpus file, without the newline.
    pub fn to_line(&self) -> String {
        crate::text::join_fields(self.units.iter().map(String::as_str))
    }
}

pub fn join<S: AsRef<str>>(units: &[S]) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for unit in units {
        current.push_str(unit.as_ref());
        while let Some(pos) = current.find(END_OF_TOKEN) {
            tokens.push(current[..pos].to_owned());
            current.drain(..pos + END_OF_TOKEN.len());
        }
    }
    if !current.is_empty() {
        return Err(Error::IncompleteToken);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(units: &[&str]) -> SubwordSequence {
        SubwordSequence::new(units.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn join_examples() {
        assert_eq!(seq(&["set", "ter</t>"]).join().unwrap(), vec!["setter"]);
        assert!(seq(&[]).join().unwrap().is_empty());
        assert_eq!(seq(&["a", "b</t>", "c</t>"]).join().unwrap(), vec!["ab", "c"]);
        assert!(matches!(seq(&["a", "b</t>", "c"]).join(), Err(Error::IncompleteToken)));
    }

    #[test]
    fn boundaries() {
        assert_eq!(seq(&["a", "b</t>", "c</t>"]).token_boundaries(), vec![1, 2]);
    }

    #[test]
    fn empty_table_vocabulary() {
        let t = MergeTable::empty(0);
        let v = t.vocabulary();
        assert_eq!(v.len(), alphabet().count() + 1);
        assert!(v.contains(END_OF_TOKEN));
        let vocab = t.vocab();
        assert_eq!(vocab.len(), alphabet().count() + 2);
        assert_eq!(vocab.unit(vocab.unknown_id()), UNKNOWN_CHAR);
        assert!(vocab.is_complete(vocab.end_of_token_id()));
        assert!(!vocab.is_complete(vocab.id("a").unwrap()));
    }

    #[test]
    fn header_only_file() {
        let t = MergeTable::empty(0);
        assert_eq!(t.to_text(), "#bpe-v1 0\n");
        assert_eq!(MergeTable::from_text("#bpe-v1 0\n").unwrap(), t);
    }

    #[test]
    fn table_text_round_trip() {
        let t = MergeTable::new(
            vec![
                ("a".into(), "</t>".into()),
                (" ".into(), "\\".into()),
                ("\"".into(), " \\</t>".into()),
            ],
            10,
        )
        .unwrap();
        let text = t.to_text();
        assert_eq!(text, "#bpe-v1 10\na </t>\n\\s \\\\\n\" \\s\\\\</t>\n");
        let back = MergeTable::from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.content_hash(), t.content_hash());
    }

    #[test]
    fn table_validation() {
        assert!(MergeTable::from_text("").is_err());
        assert!(MergeTable::from_text("#bpe-v2 3\n").is_err());
        assert!(MergeTable::from_text("#bpe-v1 3\na b c\n").is_err());
        assert!(MergeTable::from_text("#bpe-v1 1\na b\nc d\n").is_err());
        assert!(MergeTable::new(vec![("a</t>".into(), "b".into())], 1).is_err());
        assert!(MergeTable::new(vec![("a".into(), "</t>b".into())], 1).is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let a = MergeTable::new(vec![("a".into(), "b".into())], 5).unwrap();
        let b = MergeTable::new(vec![("a".into(), "c".into())], 5).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.vocab().hash(), a.content_hash());
    }

    #[test]
    fn line_format() {
        let s = seq(&["\"a", " ", "b\"</t>"]);
        let line = s.to_line();
        assert_eq!(line, "\"a \\s b\"</t>");
        assert_eq!(SubwordSequence::from_line(&line).unwrap(), s);
        assert_eq!(SubwordSequence::from_line("").unwrap(), seq(&[]));
    }
}
