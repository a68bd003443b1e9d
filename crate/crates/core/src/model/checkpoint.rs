//! Binary checkpoint container. Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "XMPTCKPT"
//! version    u32      = 1
//! n, k, checks, num_layers, embed_dim, heads, ffnn_multiplier   u32 each
//! arch       u8       0 = crossmpt, 1 = ecct
//! syndrome   u8       0 = plus-minus, 1 = zero-one
//! step       u64      optimizer steps taken (0 when saved without optimizer state)
//! count      u32      number of tensor records
//! records:   name_len u32, name (utf-8), rank u32, dims u32 x rank, data f32 x prod(dims)
//! ```
//!
//! Model tensors come first, in [`ModelParams::named`] order. Optimizer
//! moments follow as `adam.m.<name>` and `adam.v.<name>`.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::{Arch, ModelConfig, ModelParams, SyndromeEmbedding};
use crate::channel::seeded_rng;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"XMPTCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("checkpoint header is invalid: {0}")]
    Header(String),
    #[error("tensor {index}: expected {expected} {expected_shape:?}, found {found} {found_shape:?}")]
    Tensor {
        index: usize,
        expected: String,
        expected_shape: Vec<usize>,
        found: String,
        found_shape: Vec<usize>,
    },
    #[error("checkpoint is for {found} but {expected} was requested")]
    ConfigMismatch { expected: String, found: String },
}

/// Adam moments aligned with [`ModelParams::named`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub optimizer: Option<OptimizerState>,
}

fn describe(c: &ModelConfig) -> String {
    format!(
        "{} n={} k={} checks={} N={} d={} heads={} ffnn={}",
        c.arch.as_str(),
        c.n,
        c.k,
        c.checks,
        c.num_layers,
        c.embed_dim,
        c.heads,
        c.ffnn_multiplier
    )
}

impl Checkpoint {
    /// Fails unless the stored configuration equals `expected`.
    pub fn expect_config(&self, expected: &ModelConfig) -> Result<(), CheckpointError> {
        if &self.config != expected {
            return Err(CheckpointError::ConfigMismatch {
                expected: describe(expected),
                found: describe(&self.config),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [c.n, c.k, c.checks, c.num_layers, c.embed_dim, c.heads, c.ffnn_multiplier] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(match c.arch {
            Arch::CrossMpt => 0,
            Arch::Ecct => 1,
        });
        out.push(match c.syndrome_embedding {
            SyndromeEmbedding::PlusMinus => 0,
            SyndromeEmbedding::ZeroOne => 1,
        });
        let named = self.params.named();
        let mut records: Vec<(String, &Tensor<f32>)> = named.clone();
        let step = match &self.optimizer {
            Some(opt) => {
                for ((name, _), t) in named.iter().zip(&opt.m) {
                    records.push((format!("adam.m.{name}"), t));
                }
                for ((name, _), t) in named.iter().zip(&opt.v) {
                    records.push((format!("adam.v.{name}"), t));
                }
                opt.step
            }
            None => 0,
        };
        out.extend_from_slice(&step.to_le_bytes());
        out.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for (name, t) in records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut dims = [0usize; 7];
        for d in dims.iter_mut() {
            *d = r.u32()? as usize;
        }
        let arch = match r.u8()? {
            0 => Arch::CrossMpt,
            1 => Arch::Ecct,
            a => return Err(CheckpointError::Header(format!("unknown architecture tag {a}"))),
        };
        let syndrome_embedding = match r.u8()? {
            0 => SyndromeEmbedding::PlusMinus,
            1 => SyndromeEmbedding::ZeroOne,
            s => return Err(CheckpointError::Header(format!("unknown syndrome embedding tag {s}"))),
        };
        let config = ModelConfig {
            n: dims[0],
            k: dims[1],
            checks: dims[2],
            num_layers: dims[3],
            embed_dim: dims[4],
            heads: dims[5],
            ffnn_multiplier: dims[6],
            arch,
            syndrome_embedding,
        };
        config
            .validate()
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let step = r.u64()?;
        let count = r.u32()? as usize;

        // Shapes and names come from a skeleton built for the stored config.
        let mut params = ModelParams::<f32>::init(&config, &mut seeded_rng(0, 0))
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let expected: Vec<(String, Vec<usize>)> = params
            .named()
            .into_iter()
            .map(|(name, t)| (name, t.shape.clone()))
            .collect();
        let per_set = expected.len();
        if count != per_set && count != 3 * per_set {
            return Err(CheckpointError::Header(format!(
                "{count} tensors, expected {per_set} or {}",
                3 * per_set
            )));
        }
        let mut loaded = Vec::with_capacity(count);
        for index in 0..count {
            let (want, want_shape) = &expected[index % per_set];
            let want = match index / per_set {
                0 => want.clone(),
                1 => format!("adam.m.{want}"),
                _ => format!("adam.v.{want}"),
            };
            let name_len = r.u32()? as usize;
            let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            if name != want || &shape != want_shape {
                return Err(CheckpointError::Tensor {
                    index,
                    expected: want,
                    expected_shape: want_shape.clone(),
                    found: name,
                    found_shape: shape,
                });
            }
            let numel: usize = shape.iter().product();
            let data = r
                .take(numel * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            loaded.push(Tensor::new(shape, data));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Trailing(bytes.len() - r.pos));
        }
        let mut rest = loaded.split_off(per_set);
        for (slot, t) in params.tensors_mut().into_iter().zip(loaded) {
            *slot = t;
        }
        let optimizer = if rest.is_empty() {
            None
        } else {
            let v = rest.split_off(per_set);
            Some(OptimizerState { step, m: rest, v })
        };
        Ok(Checkpoint {
            config,
            params,
            optimizer,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Writes to a sibling temp file and renames it into place.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(&ckpt.to_bytes()).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
