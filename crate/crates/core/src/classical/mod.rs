//! Reference decoders: flooding belief propagation on the Tanner graph and
//! exhaustive maximum-likelihood search for short codes.

mod bp;
mod ml;

pub use bp::{bp_decode, BpDecoder, BpVariant, TannerGraph};
pub use ml::{ml_decode, MlDecoder, ML_MAX_K};

use thiserror::Error;

use crate::codes::{hard_decision, BitMatrix, CodeError, HardWord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("received word has length {got}, code length is {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("noise standard deviation must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("max_iter must be at least 1")]
    NoIterations,
    #[error("exhaustive decoding needs k <= {limit}, code has k = {k}")]
    TooManyMessages { k: usize, limit: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Output of any decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: HardWord,
    /// Posterior LLRs (BP), logits (neural) or nothing.
    pub soft: Option<Vec<f64>>,
    /// The returned word satisfies every check.
    pub converged: bool,
    pub iterations_used: usize,
}

/// The uncoded baseline: just the hard decision of `y`.
pub fn decode_hard(h: &BitMatrix, y: &[f64]) -> Result<DecodeResult, DecodeError> {
    if y.len() != h.cols() {
        return Err(DecodeError::LengthMismatch {
            expected: h.cols(),
            got: y.len(),
        });
    }
    let bits = hard_decision(y)?;
    let converged = h.mul_vec(&bits)?.iter().all(|&b| b == 0);
    Ok(DecodeResult {
        bits,
        soft: None,
        converged,
        iterations_used: 0,
    })
}
