//! Monte-Carlo BER estimation and complexity accounting.

mod ber;
mod flops;

pub use ber::{
    estimate_ber, plot_data, BerConfig, BER_CSV_HEADER, BerPoint, BerReport, BpFrameDecoder, Frame, FrameDecoder,
    HardFrameDecoder, MlFrameDecoder, CHUNK_FRAMES,
};
pub use flops::{flops_estimate, flops_for_code, FlopsReport, ModelFlops};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::classical::DecodeError;
use crate::codes::CodeError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid evaluation settings: {0}")]
    Config(String),
    #[error("decoder returned {got} results for {expected} frames")]
    DecoderOutput { expected: usize, got: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] CodeError),
}
