//! Versioned binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! | field          | type                                   |
//! |----------------|----------------------------------------|
//! | magic          | `b"CODELMCK"`                          |
//! | version        | u32                                    |
//! | vocab_size     | u32                                    |
//! | embed_dim      | u32                                    |
//! | hidden_dim     | u32                                    |
//! | dropout_keep   | f32                                    |
//! | unroll         | u32                                    |
//! | final_lr       | f64                                    |
//! | hash length    | u32, then that many bytes of UTF-8 hex |
//! | param count    | u64                                    |
//! | parameters     | f32 each, in `ParamGroup` order        |

use super::{GruModel, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CODELMCK";

pub fn save_checkpoint(model: &GruModel) -> Vec<u8> {
    let c = &model.config;
    let hash = model.vocab_hash.as_bytes();
    let mut out = Vec::with_capacity(64 + hash.len() + 4 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for dim in [c.vocab_size, c.embed_dim, c.hidden_dim] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.dropout_keep.to_le_bytes());
    out.extend_from_slice(&(c.unroll as u32).to_le_bytes());
    out.extend_from_slice(&model.final_lr.to_le_bytes());
    out.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    out.extend_from_slice(hash);
    out.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::CorruptCheckpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("slice length"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.array(what).map(u32::from_le_bytes)
    }
}

/// Parses a checkpoint; with `expected_hash`, refuses one built for another merge table.
pub fn load_checkpoint(bytes: &[u8], expected_hash: Option<&str>) -> Result<GruModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let vocab_size = r.u32("vocab_size")? as usize;
    let embed_dim = r.u32("embed_dim")? as usize;
    let hidden_dim = r.u32("hidden_dim")? as usize;
    let dropout_keep = f32::from_le_bytes(r.array("dropout_keep")?);
    let unroll = r.u32("unroll")? as usize;
    let final_lr = f64::from_le_bytes(r.array("final_lr")?);
    let hash_len = r.u32("hash length")? as usize;
    let hash = std::str::from_utf8(r.take(hash_len, "vocabulary hash")?)
        .map_err(|_| Error::CorruptCheckpoint("vocabulary hash is not UTF-8".into()))?
        .to_owned();
    let count = u64::from_le_bytes(r.array("parameter count")?) as usize;

    let config = ModelConfig { vocab_size, embed_dim, hidden_dim, dropout_keep, unroll };
    config
        .validate()
        .map_err(|e| Error::CorruptCheckpoint(format!("invalid config: {e}")))?;
    if count != config.layout().len() {
        return Err(Error::CorruptCheckpoint(format!(
            "parameter count {count} does not match the configured shapes ({})",
            config.layout().len()
        )));
    }
    let raw = r.take(count.checked_mul(4).unwrap_or(usize::MAX), "parameters")?;
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if let Some(expected) = expected_hash {
        if hash != expected {
            return Err(Error::VocabMismatch {
                expected: hash,
                found: expected.to_owned(),
            });
        }
    }
    let params = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut model = GruModel::from_params(config, hash, params)?;
    model.final_lr = final_lr;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GruModel {
        let mut m = GruModel::init(
            ModelConfig { unroll: 17, dropout_keep: 0.75, ..ModelConfig::with_dims(7, 5) },
            "abc123",
            9,
        )
        .unwrap();
        m.final_lr = 0.025;
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let bytes = save_checkpoint(&m);
        let back = load_checkpoint(&bytes, Some("abc123")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.checksum(), m.checksum());
        assert_eq!(save_checkpoint(&back), bytes);
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = save_checkpoint(&sample());
        for cut in [0, 5, 20, 60, bytes.len() - 1] {
            match load_checkpoint(&bytes[..cut], None) {
                Err(Error::CorruptCheckpoint(_)) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(load_checkpoint(&long, None), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn hash_mismatch_refused() {
        let bytes = save_checkpoint(&sample());
        assert!(matches!(
            load_checkpoint(&bytes, Some("different")),
            Err(Error::VocabMismatch { .. })
        ));
    }

    #[test]
    fn version_mismatch_refused() {
        let mut bytes = save_checkpoint(&sample());
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            load_checkpoint(&bytes, None),
            Err(Error::CheckpointVersion { found: 2, expected: 1 })
        ));
    }
}
