//! GF(2) linear-code algebra.

mod alist;
mod bitmatrix;
mod linear;

pub use alist::{emit_alist, emit_plain, parse_alist, parse_plain, read_pcm};
pub use bitmatrix::BitMatrix;
pub use linear::{derive_generator, hard_decision, syndrome, HardWord, LinearCode, RedundantRows};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("parity-check matrix is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("code has no information bits (rank {rank} = n = {n})")]
    NoMessageBits { rank: usize, n: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entry {index} is not a bit (value {value})")]
    NotABit { index: usize, value: u8 },
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}
