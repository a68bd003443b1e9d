//! Error-correcting-code workbench built around a cross-attention
//! message-passing transformer decoder.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! * [`codes`]: GF(2) matrices, alist I/O, generator derivation, encoding.
//! * [`channel`]: BPSK over AWGN / Rayleigh, SNR conversion, training targets.
//! * [`masks`]: attention masks derived from the parity-check matrix.
//! * [`tensor`]: a small reverse-mode autodiff tape.
//! * [`model`]: the cross-attention decoder and the self-attention baseline.
//! * [`classical`]: belief propagation and exhaustive ML decoding.
//! * [`train`]: Adam with cosine decay on the multiplicative-noise target.
//! * [`eval`]: Monte-Carlo BER estimation and FLOPs accounting.

pub mod channel;
pub mod classical;
pub mod codes;
pub mod eval;
pub mod masks;
pub mod model;
pub mod tensor;
pub mod train;

pub use codes::{BitMatrix, HardWord, LinearCode, RedundantRows};
pub use classical::DecodeResult;
