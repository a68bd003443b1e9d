use super::params::{LayerVars, ParamVars};
use super::{Arch, ModelConfig, ModelError};
use crate::channel::ReceivedWord;
use crate::codes::BitMatrix;
use crate::masks::{build_crossmpt_masks, build_ecct_mask, AttentionMask, MaskSet};
use crate::tensor::{Real, Tape, TensorError, Var};

/// Masks matching a decoder architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelMasks {
    Cross(MaskSet),
    Ecct(AttentionMask),
}

impl ModelMasks {
    pub fn build(h: &BitMatrix, arch: Arch) -> Self {
        match arch {
            Arch::CrossMpt => ModelMasks::Cross(build_crossmpt_masks(h)),
            Arch::Ecct => ModelMasks::Ecct(build_ecct_mask(h, false)),
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            ModelMasks::Cross(_) => Arch::CrossMpt,
            ModelMasks::Ecct(_) => Arch::Ecct,
        }
    }

    fn check(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let (n, m) = (config.n, config.checks);
        let ok = match self {
            ModelMasks::Cross(set) => {
                (set.m2s.rows(), set.m2s.cols()) == (n, m)
                    && (set.s2m.rows(), set.s2m.cols()) == (m, n)
            }
            ModelMasks::Ecct(mask) => (mask.rows(), mask.cols()) == (n + m, n + m),
        };
        if self.arch() != config.arch {
            return Err(ModelError::Config(format!(
                "masks are for {} but the model is {}",
                self.arch().as_str(),
                config.arch.as_str()
            )));
        }
        if !ok {
            return Err(ModelError::Config(format!(
                "mask dimensions do not match n = {n}, checks = {m}"
            )));
        }
        Ok(())
    }
}

/// A batch of decoder inputs: magnitudes |y| and syndromes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub batch: usize,
    /// batch x n, row-major.
    pub magnitude: Vec<f64>,
    /// batch x checks, row-major.
    pub synd: Vec<u8>,
}

impl ModelInput {
    pub fn from_received<'a>(words: impl IntoIterator<Item = &'a ReceivedWord>) -> Self {
        let mut input = ModelInput {
            batch: 0,
            magnitude: Vec::new(),
            synd: Vec::new(),
        };
        for w in words {
            input.batch += 1;
            input.magnitude.extend_from_slice(&w.magnitude);
            input.synd.extend_from_slice(&w.synd);
        }
        input
    }
}

/// Output handles of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// batch x n logits.
    pub logits: Var,
    /// Attention nodes per layer: [bits<-checks, checks<-bits] for the
    /// cross-attention decoder, [self] for the baseline.
    pub attention: Vec<Vec<Var>>,
}

/// M_i = |y_i|·W_i and S_j = φ(s_j)·W_{n+j}, stacked over the batch.
pub fn embed<T: Real>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    config: &ModelConfig,
    input: &ModelInput,
) -> Result<(Var, Var), TensorError> {
    let (n, m) = (config.n, config.checks);
    let b = input.batch;
    let mag_index = (0..b).flat_map(|_| 0..n).collect();
    let mag_scale = input.magnitude.iter().map(|&v| T::from_f64(v)).collect();
    let syn_index = (0..b).flat_map(|_| n..n + m).collect();
    let syn_scale = input
        .synd
        .iter()
        .map(|&s| T::from_f64(config.syndrome_embedding.map(s)))
        .collect();
    let mag = tape.gather_scale(vars.pos_embed, mag_index, mag_scale)?;
    let syn = tape.gather_scale(vars.pos_embed, syn_index, syn_scale)?;
    Ok((mag, syn))
}

/// Pre-norm transformer block: `x + attn(norm1(x) -> norm1(context))`, then
/// `+ ffnn(norm2(·))`. With `context == None` it is self-attention.
fn block<T: Real>(
    tape: &mut Tape<T>,
    l: &LayerVars,
    x: Var,
    context: Option<Var>,
    mask: &AttentionMask,
    heads: usize,
) -> Result<(Var, Var), TensorError> {
    let xn = tape.layer_norm(x, l.norm1_g, l.norm1_b)?;
    let cn = match context {
        Some(c) => tape.layer_norm(c, l.norm1_g, l.norm1_b)?,
        None => xn,
    };
    let q = tape.linear(xn, l.w_q, l.b_q)?;
    let k = tape.linear(cn, l.w_k, l.b_k)?;
    let v = tape.linear(cn, l.w_v, l.b_v)?;
    let att = tape.attention(q, k, v, mask, heads)?;
    let proj = tape.linear(att, l.w_o, l.b_o)?;
    let x1 = tape.add(x, proj)?;
    let x1n = tape.layer_norm(x1, l.norm2_g, l.norm2_b)?;
    let hidden = tape.linear(x1n, l.ff1_w, l.ff1_b)?;
    let hidden = tape.gelu(hidden);
    let ff = tape.linear(hidden, l.ff2_w, l.ff2_b)?;
    Ok((tape.add(x1, ff)?, att))
}

/// Interleaves per-sample bit and check rows into [batch·(n+m), d].
fn join_sequences<T: Real>(
    tape: &mut Tape<T>,
    mag: Var,
    syn: Var,
    config: &ModelConfig,
    batch: usize,
) -> Result<Var, TensorError> {
    let d = config.embed_dim;
    let m3 = tape.reshape(mag, vec![batch, config.n, d])?;
    let s3 = tape.reshape(syn, vec![batch, config.checks, d])?;
    let joined = tape.concat(m3, s3, 1)?;
    tape.reshape(joined, vec![batch * config.seq_len(), d])
}

pub fn forward<T: Real>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    config: &ModelConfig,
    masks: &ModelMasks,
    input: &ModelInput,
) -> Result<ForwardTrace, ModelError> {
    masks.check(config)?;
    let (n, m, b) = (config.n, config.checks, input.batch);
    if b == 0 || input.magnitude.len() != b * n || input.synd.len() != b * m {
        return Err(ModelError::Config(format!(
            "input holds {} magnitudes and {} syndrome bits for batch {b}, expected n = {n}, checks = {m}",
            input.magnitude.len(),
            input.synd.len()
        )));
    }
    let (mag, syn) = embed(tape, vars, config, input)?;
    let mut attention = Vec::with_capacity(config.num_layers);
    let seq = match masks {
        ModelMasks::Cross(set) => {
            let (mut mag, mut syn) = (mag, syn);
            for l in &vars.layers {
                let (new_mag, a1) = block(tape, l, mag, Some(syn), &set.m2s, config.heads)?;
                let (new_syn, a2) = block(tape, l, syn, Some(new_mag), &set.s2m, config.heads)?;
                mag = new_mag;
                syn = new_syn;
                attention.push(vec![a1, a2]);
            }
            join_sequences(tape, mag, syn, config, b)?
        }
        ModelMasks::Ecct(mask) => {
            let mut x = join_sequences(tape, mag, syn, config, b)?;
            for l in &vars.layers {
                let (nx, a) = block(tape, l, x, None, mask, config.heads)?;
                x = nx;
                attention.push(vec![a]);
            }
            x
        }
    };
    let normed = tape.layer_norm(seq, vars.head_norm_g, vars.head_norm_b)?;
    let per_pos = tape.linear(normed, vars.fc1_w, vars.fc1_b)?;
    let flat = tape.reshape(per_pos, vec![b, config.seq_len()])?;
    let logits = tape.linear(flat, vars.fc2_w, vars.fc2_b)?;
    Ok(ForwardTrace { logits, attention })
}

/// Per-sample BCE summed over bits, averaged over the batch.
pub fn bce_loss<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    targets: &[u8],
    batch: usize,
) -> Result<Var, TensorError> {
    let t = targets.iter().map(|&b| T::from_f64(f64::from(b))).collect();
    let total = tape.bce_with_logits_sum(logits, t)?;
    Ok(tape.scale(total, T::one() / T::from_f64(batch as f64)))
}

/// Logits as plain rows, one per batch element.
pub fn logits_rows<T: Real>(tape: &Tape<T>, logits: Var) -> Vec<Vec<f64>> {
    let n = tape.shape(logits)[1];
    tape.value(logits)
        .chunks(n)
        .map(|row| row.iter().map(|v| (*v).as_f64()).collect())
        .collect()
}
