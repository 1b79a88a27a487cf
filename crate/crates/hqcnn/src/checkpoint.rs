//! Binary checkpoint format.
//!
//! ```text
//! magic "HQCNNCKP" | u32 version
//! u32 meta_len | meta_len bytes of UTF-8 `key=value` lines
//! u32 tensor_count
//! per tensor: u32 name_len | name | u32 rank | rank x u64 dims | dims-product x f32
//! 32-byte SHA-256 of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hqcnn_core::hybrid::{Architecture, HeadMode, HybridModel};
use hqcnn_core::Tensor;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HQCNNCKP";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("truncated")]
    Truncated,
    #[error("digest mismatch")]
    Digest,
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    /// Captures the model's tensors plus `model`, `architecture` and `head`
    /// entries, added on top of `meta`.
    pub fn from_model(model: &HybridModel, mut meta: BTreeMap<String, String>) -> Checkpoint {
        meta.insert("model".into(), model.name().into());
        meta.insert("architecture".into(), model.architecture().to_string());
        meta.insert("head".into(), model.head.mode.to_string());
        if let HeadMode::Shots { seed, .. } = model.head.mode {
            meta.insert("head_seed".into(), seed.to_string());
        }
        Checkpoint {
            meta,
            tensors: model.named_tensors(),
        }
    }

    /// Rebuilds the model from the stored architecture and tensors.
    pub fn to_model(&self) -> Result<HybridModel, FormatError> {
        let get = |key: &str| {
            self.meta
                .get(key)
                .ok_or_else(|| FormatError::Malformed(format!("metadata lacks `{key}`")))
        };
        let malformed = |e: hqcnn_core::Error| FormatError::Malformed(e.to_string());
        let arch: Architecture = get("architecture")?.parse().map_err(malformed)?;
        let mut head: HeadMode = get("head")?.parse().map_err(malformed)?;
        if let HeadMode::Shots { seed, .. } = &mut head {
            if let Some(s) = self.meta.get("head_seed") {
                *seed = s
                    .parse()
                    .map_err(|_| FormatError::Malformed(format!("head_seed `{s}`")))?;
            }
        }
        let mut model = HybridModel::new(get("model")?.as_str(), arch, 0)
            .map_err(malformed)?
            .with_head_mode(head);
        let expected = model.named_tensors();
        if expected.len() != self.tensors.len() {
            return Err(FormatError::Malformed(format!(
                "{} tensors stored, architecture has {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        for (name, value) in &self.tensors {
            model.set_tensor(name, value.clone()).map_err(malformed)?;
        }
        Ok(model)
    }

    pub fn meta_value<T: std::str::FromStr>(&self, key: &str) -> Option<T> {
        self.meta.get(key)?.parse().ok()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let mut meta = String::new();
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(['=', '\n', '\r']) || v.contains(['\n', '\r']) {
                return Err(FormatError::Malformed(format!(
                    "metadata entry `{k}` cannot be stored"
                )));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_len(&mut out, meta.len())?;
        out.extend_from_slice(meta.as_bytes());
        put_len(&mut out, self.tensors.len())?;
        for (name, tensor) in &self.tensors {
            put_len(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_len(&mut out, tensor.shape().len())?;
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in tensor.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let mut r = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version { found: version });
        }
        if bytes.len() < r.pos + DIGEST_LEN {
            return Err(FormatError::Truncated);
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            // A cut-off file fails the digest too; it is reported as
            // truncated when the remaining body is incomplete.
            let mut probe = Reader {
                bytes: body,
                pos: r.pos,
            };
            return Err(match probe.body() {
                Err(FormatError::Truncated) => FormatError::Truncated,
                _ => FormatError::Digest,
            });
        }
        let mut r = Reader {
            bytes: body,
            pos: r.pos,
        };
        let ckpt = r.body()?;
        if r.pos != body.len() {
            return Err(FormatError::Malformed(format!(
                "{} trailing bytes",
                body.len() - r.pos
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes().map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        fs::write(path, bytes).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Checkpoint::from_bytes(&bytes).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Loads a checkpoint and rebuilds its model.
    pub fn load_model(path: &Path) -> Result<(Checkpoint, HybridModel)> {
        let ckpt = Checkpoint::load(path)?;
        let model = ckpt.to_model().map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok((ckpt, model))
    }
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<(), FormatError> {
    let n =
        u32::try_from(n).map_err(|_| FormatError::Malformed(format!("length {n} exceeds u32")))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self, n: usize) -> Result<String, FormatError> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| FormatError::Malformed("invalid UTF-8".into()))
    }

    fn body(&mut self) -> Result<Checkpoint, FormatError> {
        let meta_len = self.u32()? as usize;
        let text = self.string(meta_len)?;
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| FormatError::Malformed(format!("metadata line `{line}`")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = self.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = self.u32()? as usize;
            let name = self.string(name_len)?;
            let rank = self.u32()? as usize;
            let mut shape = Vec::new();
            for _ in 0..rank {
                shape.push(usize::try_from(self.u64()?).map_err(|_| {
                    FormatError::Malformed(format!("tensor `{name}` dimension overflows"))
                })?);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| FormatError::Malformed(format!("tensor `{name}` is too large")))?;
            let raw = self.take(len)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::from_vec(&shape, data)
                .map_err(|e| FormatError::Malformed(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, tensor));
        }
        Ok(Checkpoint { meta, tensors })
    }
}
