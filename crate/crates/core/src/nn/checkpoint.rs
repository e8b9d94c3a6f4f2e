//! Binary checkpoints: magic, version, a JSON header listing every tensor with
//! its shape, then the tensors as little-endian `f32` in header order.

use std::path::Path;

use super::model::EncoderConfig;
use super::{Params, Standardizer};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const MAGIC: &[u8; 8] = b"MCSIMCLR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckpointMeta {
    pub kind: String,
    pub encoder: EncoderConfig,
    pub epochs_completed: usize,
    pub step: u64,
    pub seed: u64,
    #[serde(default)]
    pub n_classes: Option<usize>,
    #[serde(default)]
    pub features: FeatureConfig,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct Header {
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta) -> Self {
        Self {
            meta,
            tensors: Vec::new(),
        }
    }

    /// Appends every tensor of `p`, names prefixed with `prefix`.
    pub fn push<P: Params<f32>>(&mut self, prefix: &str, p: &P) {
        for v in p.params() {
            self.tensors.push(Tensor {
                name: format!("{prefix}{}", v.name),
                shape: v.shape,
                data: v.data.to_vec(),
            });
        }
    }

    pub fn push_standardizer(&mut self, st: &Standardizer) {
        self.push_named_standardizer("standardize", st);
    }

    /// Stores `st` as `<name>.mean` and `<name>.std`.
    pub fn push_named_standardizer(&mut self, name: &str, st: &Standardizer) {
        for (suffix, data) in [("mean", &st.mean), ("std", &st.std)] {
            self.tensors.push(Tensor {
                name: format!("{name}.{suffix}"),
                shape: vec![data.len()],
                data: data.clone(),
            });
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.tensors.iter().any(|t| t.name.starts_with(prefix))
    }

    /// Overwrites `p` with the tensors stored under `prefix`; names and shapes must match.
    pub fn restore<P: Params<f32>>(&self, prefix: &str, p: &mut P) -> Result<()> {
        let wanted: Vec<(String, Vec<usize>)> = p
            .params()
            .into_iter()
            .map(|v| (format!("{prefix}{}", v.name), v.shape))
            .collect();
        let mut sources = Vec::with_capacity(wanted.len());
        for (name, shape) in &wanted {
            let t = self
                .tensor(name)
                .ok_or_else(|| Error::Data(format!("checkpoint has no tensor {name}")))?;
            if &t.shape != shape {
                return Err(Error::Data(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            sources.push(&t.data);
        }
        for (dst, src) in p.params_mut().into_iter().zip(sources) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    pub fn standardizer(&self) -> Result<Standardizer> {
        self.named_standardizer("standardize")
    }

    pub fn named_standardizer(&self, name: &str) -> Result<Standardizer> {
        let get = |n: String| {
            self.tensor(&n)
                .map(|t| t.data.clone())
                .ok_or_else(|| Error::Data(format!("checkpoint has no tensor {n}")))
        };
        Ok(Standardizer {
            mean: get(format!("{name}.mean"))?,
            std: get(format!("{name}.std"))?,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
        let n_values: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(16 + json.len() + 4 * n_values);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            if t.data.len() != t.shape.iter().product::<usize>() {
                return Err(Error::Size(format!("tensor {} data does not match shape {:?}", t.name, t.shape)));
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: "<checkpoint>".into(),
            reason,
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(format!("header: {e}")))?;
        let mut off = 16 + hlen;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let raw = bytes
                .get(off..off + 4 * n)
                .ok_or_else(|| bad(format!("truncated tensor {}", e.name)))?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            off += 4 * n;
            tensors.push(Tensor {
                name: e.name,
                shape: e.shape,
                data,
            });
        }
        if off != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - off)));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        // write then rename so a crash never leaves a torn checkpoint behind
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }
}
