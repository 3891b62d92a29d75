//! Binary checkpoint container for a pool of models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"GENEXCKP"
//! version  u32
//! count    u32
//! record*  id:str  meta:str(json: config, lineage, generation)  signature:str
//!          tensor_count:u32
//!          tensor* name:str role:u8 group:u8 ndim:u32 dims:u64* len:u64 f64*
//! digest   32 bytes, SHA-256 of everything above
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8. Payloads are raw f64 bits, so
//! a round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{Group, NamedParamSet, ParamTensor, Role};
use super::{LearnerConfig, Lineage, ModelRecord};
use crate::error::{GenexError, Result};

const MAGIC: &[u8; 8] = b"GENEXCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Meta {
    config: LearnerConfig,
    lineage: Lineage,
    generation: u32,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn encode(pool: &[ModelRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(pool.len() as u32).to_le_bytes());
    for record in pool {
        put_str(&mut buf, &record.id);
        let meta = Meta {
            config: record.config.clone(),
            lineage: record.lineage.clone(),
            generation: record.generation,
        };
        put_str(&mut buf, &serde_json::to_string(&meta)?);
        put_str(&mut buf, &record.params.signature());
        let tensors = record.params.tensors();
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            put_str(&mut buf, &t.name);
            buf.push(t.role.code());
            buf.push(t.group.code());
            buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            buf.extend_from_slice(&(t.values.len() as u64).to_le_bytes());
            for v in &t.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

/// Write `pool` to `path` atomically (temp file, then rename).
pub fn save_checkpoint(pool: &[ModelRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(pool)?;
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| GenexError::Format("unexpected end of data".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| GenexError::Format("length overflow".into()))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| GenexError::Format("invalid UTF-8".into()))
    }
}

fn decode(bytes: &[u8]) -> Result<Vec<ModelRecord>> {
    if bytes.len() < MAGIC.len() + 8 + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(GenexError::Format("not a checkpoint file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    let mut r = Reader { bytes: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(GenexError::Format(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(GenexError::Format("checksum mismatch".into()));
    }
    let count = r.u32()? as usize;
    let mut pool = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.str()?;
        let meta: Meta = serde_json::from_str(&r.str()?)
            .map_err(|e| GenexError::Format(format!("record `{id}`: bad metadata: {e}")))?;
        let signature = r.str()?;
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(1 << 12));
        for _ in 0..n_tensors {
            let name = r.str()?;
            let role = Role::from_code(r.u8()?).ok_or_else(|| GenexError::Format("bad role".into()))?;
            let group = Group::from_code(r.u8()?).ok_or_else(|| GenexError::Format("bad group".into()))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
            let n = r.len()?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| GenexError::Format("length overflow".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push(ParamTensor::new(name, shape, values, role, group));
        }
        let params = NamedParamSet::new(tensors).map_err(|e| GenexError::Format(format!("record `{id}`: {e}")))?;
        if params.signature() != signature {
            return Err(GenexError::Format(format!("record `{id}`: signature mismatch")));
        }
        pool.push(ModelRecord {
            id,
            params,
            config: meta.config,
            lineage: meta.lineage,
            generation: meta.generation,
        });
    }
    if r.pos != body.len() {
        return Err(GenexError::Format("trailing bytes".into()));
    }
    Ok(pool)
}

/// Load a pool. Any corruption yields a format error and no records.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<ModelRecord>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{predict_proba, train};
    use crate::synthetic;

    fn pool(n: u64) -> Vec<ModelRecord> {
        let data = synthetic::two_blobs(100, 2.0, 1);
        (0..n)
            .map(|s| {
                let cfg = LearnerConfig { seed: s, epochs: 1, ..Default::default() };
                let mut m = train(&cfg, &data, None).unwrap();
                if s % 2 == 1 {
                    m.lineage = Lineage::Genetic { parent_a: "a".into(), parent_b: "b".into() };
                    m.generation = 3;
                }
                m
            })
            .collect()
    }

    #[test]
    fn round_trip_preserves_predictions_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.ckpt");
        let models = pool(5);
        save_checkpoint(&models, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, models);
        let probe = synthetic::two_blobs(20, 2.0, 9);
        for (a, b) in models.iter().zip(&loaded) {
            let pa = predict_proba(a, probe.features()).unwrap();
            let pb = predict_proba(b, probe.features()).unwrap();
            assert!(pa.iter().zip(pb.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn empty_pool_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.ckpt");
        save_checkpoint(&[], &path).unwrap();
        assert!(load_checkpoint(&path).unwrap().is_empty());
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.ckpt");
        save_checkpoint(&pool(2), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(GenexError::Format(_))));

        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(GenexError::Format(_))));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = encode(&[]).unwrap();
        bytes[8] = 9;
        let err = decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 9"), "{err}");
    }
}
