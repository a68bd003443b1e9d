use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::channel::ChannelRng;
use crate::tensor::{Real, Tape, Tensor, Var};

/// Weights of one decoder layer. In the cross-attention decoder both blocks
/// of the layer use this single set.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub w_q: Tensor<T>,
    pub b_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub b_k: Tensor<T>,
    pub w_v: Tensor<T>,
    pub b_v: Tensor<T>,
    pub w_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub ff1_w: Tensor<T>,
    pub ff1_b: Tensor<T>,
    pub ff2_w: Tensor<T>,
    pub ff2_b: Tensor<T>,
    pub norm1_g: Tensor<T>,
    pub norm1_b: Tensor<T>,
    pub norm2_g: Tensor<T>,
    pub norm2_b: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// One row per position of the [bits; checks] sequence.
    pub pos_embed: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    pub head_norm_g: Tensor<T>,
    pub head_norm_b: Tensor<T>,
    /// Per-position d -> 1 projection, shared across positions.
    pub fc1_w: Tensor<T>,
    pub fc1_b: Tensor<T>,
    /// Dense (n + checks) -> n projection.
    pub fc2_w: Tensor<T>,
    pub fc2_b: Tensor<T>,
}

const LAYER_FIELDS: [&str; 16] = [
    "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o", "ff1_w", "ff1_b", "ff2_w", "ff2_b",
    "norm1_g", "norm1_b", "norm2_g", "norm2_b",
];

impl<T> LayerParams<T> {
    fn fields(&self) -> [&Tensor<T>; 16] {
        [
            &self.w_q, &self.b_q, &self.w_k, &self.b_k, &self.w_v, &self.b_v, &self.w_o, &self.b_o,
            &self.ff1_w, &self.ff1_b, &self.ff2_w, &self.ff2_b, &self.norm1_g, &self.norm1_b,
            &self.norm2_g, &self.norm2_b,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Tensor<T>; 16] {
        [
            &mut self.w_q, &mut self.b_q, &mut self.w_k, &mut self.b_k, &mut self.w_v,
            &mut self.b_v, &mut self.w_o, &mut self.b_o, &mut self.ff1_w, &mut self.ff1_b,
            &mut self.ff2_w, &mut self.ff2_b, &mut self.norm1_g, &mut self.norm1_b,
            &mut self.norm2_g, &mut self.norm2_b,
        ]
    }
}

fn xavier<T: Real>(rows: usize, cols: usize, rng: &mut ChannelRng) -> Tensor<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::from_f64(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(vec![rows, cols], data)
}

impl<T: Real> LayerParams<T> {
    fn init(d: usize, ff: usize, rng: &mut ChannelRng) -> Self {
        LayerParams {
            w_q: xavier(d, d, rng),
            b_q: Tensor::zeros(vec![d]),
            w_k: xavier(d, d, rng),
            b_k: Tensor::zeros(vec![d]),
            w_v: xavier(d, d, rng),
            b_v: Tensor::zeros(vec![d]),
            w_o: xavier(d, d, rng),
            b_o: Tensor::zeros(vec![d]),
            ff1_w: xavier(d, ff, rng),
            ff1_b: Tensor::zeros(vec![ff]),
            ff2_w: xavier(ff, d, rng),
            ff2_b: Tensor::zeros(vec![d]),
            norm1_g: Tensor::filled(vec![d], T::one()),
            norm1_b: Tensor::zeros(vec![d]),
            norm2_g: Tensor::filled(vec![d], T::one()),
            norm2_b: Tensor::zeros(vec![d]),
        }
    }
}

/// Tape handles mirroring [`LayerParams`].
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub w_q: Var,
    pub b_q: Var,
    pub w_k: Var,
    pub b_k: Var,
    pub w_v: Var,
    pub b_v: Var,
    pub w_o: Var,
    pub b_o: Var,
    pub ff1_w: Var,
    pub ff1_b: Var,
    pub ff2_w: Var,
    pub ff2_b: Var,
    pub norm1_g: Var,
    pub norm1_b: Var,
    pub norm2_g: Var,
    pub norm2_b: Var,
}

/// Tape handles mirroring [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub pos_embed: Var,
    pub layers: Vec<LayerVars>,
    pub head_norm_g: Var,
    pub head_norm_b: Var,
    pub fc1_w: Var,
    pub fc1_b: Var,
    pub fc2_w: Var,
    pub fc2_b: Var,
}

impl ParamVars {
    /// Handles in the same order as [`ModelParams::named`].
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = vec![self.pos_embed];
        for l in &self.layers {
            out.extend([
                l.w_q, l.b_q, l.w_k, l.b_k, l.w_v, l.b_v, l.w_o, l.b_o, l.ff1_w, l.ff1_b, l.ff2_w,
                l.ff2_b, l.norm1_g, l.norm1_b, l.norm2_g, l.norm2_b,
            ]);
        }
        out.extend([
            self.head_norm_g,
            self.head_norm_b,
            self.fc1_w,
            self.fc1_b,
            self.fc2_w,
            self.fc2_b,
        ]);
        out
    }

    /// Inverse of [`ParamVars::ordered`].
    pub fn from_vars(vars: &[Var], num_layers: usize) -> Self {
        let layer = |i: usize| {
            let v = &vars[1 + 16 * i..1 + 16 * (i + 1)];
            LayerVars {
                w_q: v[0],
                b_q: v[1],
                w_k: v[2],
                b_k: v[3],
                w_v: v[4],
                b_v: v[5],
                w_o: v[6],
                b_o: v[7],
                ff1_w: v[8],
                ff1_b: v[9],
                ff2_w: v[10],
                ff2_b: v[11],
                norm1_g: v[12],
                norm1_b: v[13],
                norm2_g: v[14],
                norm2_b: v[15],
            }
        };
        let tail = &vars[1 + 16 * num_layers..];
        ParamVars {
            pos_embed: vars[0],
            layers: (0..num_layers).map(layer).collect(),
            head_norm_g: tail[0],
            head_norm_b: tail[1],
            fc1_w: tail[2],
            fc1_b: tail[3],
            fc2_w: tail[4],
            fc2_b: tail[5],
        }
    }
}

/// Parameter totals split by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub embedding: usize,
    pub attention: usize,
    pub ffnn: usize,
    pub norms: usize,
    pub head: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.embedding + self.attention + self.ffnn + self.norms + self.head
    }
}

impl<T: Real> ModelParams<T> {
    /// Xavier-uniform matrices (including the positional table), zero biases
    /// and unit norm gains. Deterministic for a given stream.
    pub fn init(config: &ModelConfig, rng: &mut ChannelRng) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.embed_dim;
        let ff = d * config.ffnn_multiplier;
        let len = config.seq_len();
        let pos_embed = xavier(len, d, rng);
        let layers = (0..config.num_layers)
            .map(|_| LayerParams::init(d, ff, rng))
            .collect();
        Ok(ModelParams {
            pos_embed,
            layers,
            head_norm_g: Tensor::filled(vec![d], T::one()),
            head_norm_b: Tensor::zeros(vec![d]),
            fc1_w: xavier(d, 1, rng),
            fc1_b: Tensor::zeros(vec![1]),
            fc2_w: xavier(len, config.n, rng),
            fc2_b: Tensor::zeros(vec![config.n]),
        })
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("pos_embed".to_string(), &self.pos_embed)];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(l.fields()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("head.norm_g".into(), &self.head_norm_g));
        out.push(("head.norm_b".into(), &self.head_norm_b));
        out.push(("head.fc1_w".into(), &self.fc1_w));
        out.push(("head.fc1_b".into(), &self.fc1_b));
        out.push(("head.fc2_w".into(), &self.fc2_w));
        out.push(("head.fc2_b".into(), &self.fc2_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.pos_embed];
        for l in self.layers.iter_mut() {
            out.extend(l.fields_mut());
        }
        out.extend([
            &mut self.head_norm_g,
            &mut self.head_norm_b,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
        ]);
        out
    }

    /// Puts every tensor on the tape. With `trainable` false they are
    /// constants and no gradient is tracked.
    pub fn register(&self, tape: &mut Tape<T>, trainable: bool) -> ParamVars {
        let vars: Vec<Var> = self
            .named()
            .into_iter()
            .map(|(_, t)| {
                if trainable {
                    tape.param(t)
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        ParamVars::from_vars(&vars, self.layers.len())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerParams {
                w_q: l.w_q.cast(),
                b_q: l.b_q.cast(),
                w_k: l.w_k.cast(),
                b_k: l.b_k.cast(),
                w_v: l.w_v.cast(),
                b_v: l.b_v.cast(),
                w_o: l.w_o.cast(),
                b_o: l.b_o.cast(),
                ff1_w: l.ff1_w.cast(),
                ff1_b: l.ff1_b.cast(),
                ff2_w: l.ff2_w.cast(),
                ff2_b: l.ff2_b.cast(),
                norm1_g: l.norm1_g.cast(),
                norm1_b: l.norm1_b.cast(),
                norm2_g: l.norm2_g.cast(),
                norm2_b: l.norm2_b.cast(),
            })
            .collect();
        ModelParams {
            pos_embed: self.pos_embed.cast(),
            layers,
            head_norm_g: self.head_norm_g.cast(),
            head_norm_b: self.head_norm_b.cast(),
            fc1_w: self.fc1_w.cast(),
            fc1_b: self.fc1_b.cast(),
            fc2_w: self.fc2_w.cast(),
            fc2_b: self.fc2_b.cast(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named()
            .iter()
            .all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn param_count(&self) -> ParamCount {
        let mut c = ParamCount {
            embedding: self.pos_embed.numel(),
            attention: 0,
            ffnn: 0,
            norms: self.head_norm_g.numel() + self.head_norm_b.numel(),
            head: self.fc1_w.numel() + self.fc1_b.numel() + self.fc2_w.numel() + self.fc2_b.numel(),
        };
        for l in &self.layers {
            c.attention += [&l.w_q, &l.b_q, &l.w_k, &l.b_k, &l.w_v, &l.b_v, &l.w_o, &l.b_o]
                .iter()
                .map(|t| t.numel())
                .sum::<usize>();
            c.ffnn += l.ff1_w.numel() + l.ff1_b.numel() + l.ff2_w.numel() + l.ff2_b.numel();
            c.norms += l.norm1_g.numel() + l.norm1_b.numel() + l.norm2_g.numel() + l.norm2_b.numel();
        }
        c
    }
}
