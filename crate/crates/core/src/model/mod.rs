//! Transformer decoders: the cross-attention message-passing decoder and the
//! masked self-attention baseline, sharing parameter layout and head.
//!
//! Both read a received word only through its magnitudes |y| and syndrome
//! s(y), and predict per-bit logits of the multiplicative noise: a positive
//! logit means "this bit of the hard decision is flipped".

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CheckpointError, OptimizerState, CHECKPOINT_MAGIC,
};
pub use config::{Arch, ModelConfig, SyndromeEmbedding};
pub use forward::{bce_loss, embed, forward, logits_rows, ForwardTrace, ModelInput, ModelMasks};
pub use params::{LayerParams, LayerVars, ModelParams, ParamCount, ParamVars};

use thiserror::Error;

use crate::channel::ReceivedWord;
use crate::classical::DecodeResult;
use crate::codes::{BitMatrix, CodeError, HardWord};
use crate::tensor::{Real, Tape, TensorError};

/// Stream of a seed reserved for parameter initialization, kept apart from
/// the per-step batch streams used in training.
pub const INIT_STREAM: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// x̂ = hard(y) ⊕ flip with flip_i = [logit_i > 0].
pub fn decode_from_logits(
    received: &ReceivedWord,
    logits: &[f64],
    h: &BitMatrix,
) -> Result<DecodeResult, CodeError> {
    let flips: Vec<u8> = logits.iter().map(|&l| u8::from(l > 0.0)).collect();
    let bits = received.hard.xor(&HardWord::new(flips)?);
    let converged = h.mul_vec(&bits)?.iter().all(|&b| b == 0);
    Ok(DecodeResult {
        bits,
        soft: Some(logits.to_vec()),
        converged,
        iterations_used: 1,
    })
}

/// How per-layer attention maps are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    PerLayer,
    MeanOverLayers,
}

/// Optional reduction of each map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    None,
    /// Sum over query rows: one value per key position.
    ColumnSum,
}

/// One head-averaged attention map (or its column sums).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    /// `None` when averaged over layers.
    pub layer: Option<usize>,
    /// "m2s" (bits query checks), "s2m" (checks query bits) or "self".
    pub map: &'static str,
    pub rows: usize,
    pub cols: usize,
    /// rows x cols values, or `cols` values after a column sum.
    pub values: Vec<f64>,
}

fn map_names(arch: Arch) -> &'static [&'static str] {
    match arch {
        Arch::CrossMpt => &["m2s", "s2m"],
        Arch::Ecct => &["self"],
    }
}

/// A model bundled with its masks and PCM, ready to decode.
#[derive(Debug, Clone)]
pub struct NeuralDecoder<T: Real> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
    pub masks: ModelMasks,
    pub h: BitMatrix,
}

impl<T: Real> NeuralDecoder<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>, h: BitMatrix) -> Result<Self, ModelError> {
        config.validate()?;
        if h.cols() != config.n || h.rows() != config.checks {
            return Err(ModelError::Config(format!(
                "PCM is {}x{} but the model expects {}x{}",
                h.rows(),
                h.cols(),
                config.checks,
                config.n
            )));
        }
        let masks = ModelMasks::build(&h, config.arch);
        Ok(NeuralDecoder {
            config,
            params,
            masks,
            h,
        })
    }

    /// Logits for each received word.
    pub fn logits(&self, words: &[ReceivedWord]) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape, false);
        let trace = forward(&mut tape, &vars, &self.config, &self.masks, &ModelInput::from_received(words))?;
        Ok(logits_rows(&tape, trace.logits))
    }

    pub fn decode_batch(&self, words: &[ReceivedWord]) -> Result<Vec<DecodeResult>, ModelError> {
        let logits = self.logits(words)?;
        words
            .iter()
            .zip(&logits)
            .map(|(w, l)| decode_from_logits(w, l, &self.h).map_err(ModelError::from))
            .collect()
    }

    pub fn decode(&self, word: &ReceivedWord) -> Result<DecodeResult, ModelError> {
        Ok(self.decode_batch(std::slice::from_ref(word))?.remove(0))
    }

    /// Head-averaged attention maps for one received word.
    pub fn attention_scores(
        &self,
        word: &ReceivedWord,
        aggregate: Aggregate,
        reduce: Reduce,
    ) -> Result<Vec<ScoreMap>, ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape, false);
        let trace = forward(
            &mut tape,
            &vars,
            &self.config,
            &self.masks,
            &ModelInput::from_received(std::iter::once(word)),
        )?;
        let names = map_names(self.config.arch);
        let mut per_layer: Vec<ScoreMap> = Vec::new();
        for (layer, nodes) in trace.attention.iter().enumerate() {
            for (node, &name) in nodes.iter().zip(names) {
                let heads = tape.attention_scores(*node).expect("attention node");
                let sample = &heads[0];
                let len = sample[0].len();
                let mut avg = vec![0.0; len];
                for h in sample {
                    for (a, v) in avg.iter_mut().zip(h) {
                        *a += (*v).as_f64();
                    }
                }
                let nh = sample.len() as f64;
                avg.iter_mut().for_each(|a| *a /= nh);
                let rows = tape.shape(*node)[0];
                per_layer.push(ScoreMap {
                    layer: Some(layer),
                    map: name,
                    rows,
                    cols: len / rows,
                    values: avg,
                });
            }
        }
        let maps = match aggregate {
            Aggregate::PerLayer => per_layer,
            Aggregate::MeanOverLayers => {
                let layers = trace.attention.len() as f64;
                names
                    .iter()
                    .map(|&name| {
                        let chosen: Vec<&ScoreMap> = per_layer.iter().filter(|m| m.map == name).collect();
                        let mut values = vec![0.0; chosen[0].values.len()];
                        for m in &chosen {
                            for (a, v) in values.iter_mut().zip(&m.values) {
                                *a += v / layers;
                            }
                        }
                        ScoreMap {
                            layer: None,
                            map: name,
                            rows: chosen[0].rows,
                            cols: chosen[0].cols,
                            values,
                        }
                    })
                    .collect()
            }
        };
        Ok(match reduce {
            Reduce::None => maps,
            Reduce::ColumnSum => maps
                .into_iter()
                .map(|m| {
                    let mut sums = vec![0.0; m.cols];
                    for row in m.values.chunks(m.cols) {
                        for (s, v) in sums.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    ScoreMap { values: sums, ..m }
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests;
