use std::sync::Arc;

use super::{Real, Tensor, TensorError};
use crate::masks::AttentionMask;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse attention pattern: open key columns per query row.
#[derive(Debug)]
struct Pattern {
    rows: usize,
    cols: usize,
    open: Vec<Vec<usize>>,
}

impl Pattern {
    fn from_mask(mask: &AttentionMask) -> Result<Self, TensorError> {
        if let Some(row) = mask.first_closed_row() {
            return Err(TensorError::FullyMaskedRow { row });
        }
        Ok(Pattern {
            rows: mask.rows(),
            cols: mask.cols(),
            open: mask.open_indices(),
        })
    }

    /// Offsets of each row's block inside a flattened per-(batch, head)
    /// probability buffer.
    fn offsets(&self) -> (Vec<usize>, usize) {
        let mut off = Vec::with_capacity(self.rows);
        let mut acc = 0;
        for row in &self.open {
            off.push(acc);
            acc += row.len();
        }
        (off, acc)
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Concat {
        a: Var,
        b: Var,
        outer: usize,
        a_inner: usize,
        b_inner: usize,
    },
    Sum(Var),
    Gelu {
        x: Var,
        deriv: Vec<T>,
    },
    Sigmoid(Var),
    MaskedSoftmax {
        x: Var,
        pattern: Arc<Pattern>,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    BceSum {
        logits: Var,
        targets: Vec<T>,
    },
    GatherScale {
        w: Var,
        index: Vec<usize>,
        scale: Vec<T>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        batch: usize,
        pattern: Arc<Pattern>,
        probs: Vec<T>,
    },
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recording of one forward computation.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

const LN_EPS: f64 = 1e-5;

fn gelu_parts<T: Real>(x: T) -> (T, T) {
    // tanh approximation; returns (value, derivative)
    let c = T::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let a = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let one = T::one();
    let x3 = x * x * x;
    let u = c * (x + a * x3);
    // tanh through exp, several times cheaper than libm tanh; saturates
    // correctly when exp overflows to infinity or underflows to zero.
    let two = T::from_f64(2.0);
    let t = one - two / (one + (two * u).exp());
    let value = half * x * (one + t);
    let du = c * (one + T::from_f64(3.0) * a * x * x);
    let deriv = half * (one + t) + half * x * (one - t * t) * du;
    (value, deriv)
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t.shape, t.data, Op::Leaf, false)
    }

    /// Trainable leaf; its gradient is available after [`Tape::backward`].
    pub fn param(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape.clone(), t.data.clone(), Op::Leaf, true)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        Tensor {
            shape: self.nodes[v.0].shape.clone(),
            data: self.nodes[v.0].value.clone(),
        }
    }

    /// Accumulated gradient of `v`; zeros if nothing reached it.
    pub fn grad(&self, v: Var) -> Vec<T> {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| vec![T::zero(); self.nodes[v.0].value.len()])
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize), TensorError> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(TensorError::Shape {
                op,
                left: s.to_vec(),
                right: vec![],
            }),
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::Shape {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    /// [m, k] x [k, n] -> [m, n]
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(TensorError::Shape {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, self.value(a), false, self.value(b), false, &mut out, false);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x + *y).collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x * *y).collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).iter().map(|x| *x * s).collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, s), ng)
    }

    /// Adds the length-C vector `b` to every row of the [R, C] tensor `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (r, c) = self.dims2(a, "add_row")?;
        if self.shape(b) != [c] {
            return Err(TensorError::Shape {
                op: "add_row",
                left: vec![r, c],
                right: self.shape(b).to_vec(),
            });
        }
        let bv = self.value(b);
        let out = self
            .value(a)
            .chunks(c)
            .flat_map(|row| row.iter().zip(bv).map(|(x, y)| *x + *y))
            .collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![r, c], out, Op::AddRow(a, b), ng))
    }

    /// `x · w + b` for x [R, in], w [in, out], b [out].
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = self.dims2(a, "transpose")?;
        let av = self.value(a);
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av[i * c + j];
            }
        }
        let ng = self.needs(a);
        Ok(self.push(vec![c, r], out, Op::Transpose(a), ng))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(TensorError::Shape {
                op: "reshape",
                left: self.shape(a).to_vec(),
                right: shape,
            });
        }
        let out = self.value(a).to_vec();
        let ng = self.needs(a);
        Ok(self.push(shape, out, Op::Reshape(a), ng))
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var, TensorError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let ok = sa.len() == sb.len()
            && axis < sa.len()
            && sa.iter().zip(&sb).enumerate().all(|(i, (x, y))| i == axis || x == y);
        if !ok {
            return Err(TensorError::Shape {
                op: "concat",
                left: sa,
                right: sb,
            });
        }
        let outer: usize = sa[..axis].iter().product();
        let inner: usize = sa[axis + 1..].iter().product();
        let a_inner = sa[axis] * inner;
        let b_inner = sb[axis] * inner;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(av.len() + bv.len());
        for o in 0..outer {
            out.extend_from_slice(&av[o * a_inner..(o + 1) * a_inner]);
            out.extend_from_slice(&bv[o * b_inner..(o + 1) * b_inner]);
        }
        let mut shape = sa;
        shape[axis] += sb[axis];
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(
            shape,
            out,
            Op::Concat {
                a,
                b,
                outer,
                a_inner,
                b_inner,
            },
            ng,
        ))
    }

    /// Sum of all entries, as a shape-[1] tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        let ng = self.needs(a);
        self.push(vec![1], vec![s], Op::Sum(a), ng)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let (out, deriv) = self.value(a).iter().map(|&x| gelu_parts(x)).unzip();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Gelu { x: a, deriv }, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let ng = self.needs(a);
        self.push(self.shape(a).to_vec(), out, Op::Sigmoid(a), ng)
    }

    /// Row-wise softmax of `x + mask`. `x` is [B·r, c] and the r x c mask
    /// repeats over the B row blocks.
    pub fn masked_softmax(&mut self, x: Var, mask: &AttentionMask) -> Result<Var, TensorError> {
        let (rows, cols) = self.dims2(x, "masked_softmax")?;
        if cols != mask.cols() || rows % mask.rows() != 0 {
            return Err(TensorError::Shape {
                op: "masked_softmax",
                left: vec![rows, cols],
                right: vec![mask.rows(), mask.cols()],
            });
        }
        let pattern = Arc::new(Pattern::from_mask(mask)?);
        let xv = self.value(x);
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let open = &pattern.open[r % pattern.rows];
            let row = &xv[r * cols..(r + 1) * cols];
            let max = open.iter().map(|&c| row[c]).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for &c in open {
                let e = (row[c] - max).exp();
                out[r * cols + c] = e;
                total += e;
            }
            for &c in open {
                out[r * cols + c] /= total;
            }
        }
        let ng = self.needs(x);
        Ok(self.push(vec![rows, cols], out, Op::MaskedSoftmax { x, pattern }, ng))
    }

    /// Layer normalization over the last axis of [R, C] with learned gain and
    /// bias of length C.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, TensorError> {
        let (rows, cols) = self.dims2(x, "layer_norm")?;
        if self.shape(gain) != [cols] || self.shape(bias) != [cols] {
            return Err(TensorError::Shape {
                op: "layer_norm",
                left: vec![rows, cols],
                right: self.shape(gain).to_vec(),
            });
        }
        let eps = T::from_f64(LN_EPS);
        let n = T::from_f64(cols as f64);
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut xhat = vec![T::zero(); rows * cols];
        let mut inv_std = vec![T::zero(); rows];
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = &xv[r * cols..(r + 1) * cols];
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..cols {
                let h = (row[c] - mean) * is;
                xhat[r * cols + c] = h;
                out[r * cols + c] = h * g[c] + b[c];
            }
        }
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(
            vec![rows, cols],
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    /// Σ BCE(σ(logit), target), computed stably from logits.
    pub fn bce_with_logits_sum(&mut self, logits: Var, targets: Vec<T>) -> Result<Var, TensorError> {
        if targets.len() != self.value(logits).len() {
            return Err(TensorError::Shape {
                op: "bce_with_logits_sum",
                left: self.shape(logits).to_vec(),
                right: vec![targets.len()],
            });
        }
        let loss = self
            .value(logits)
            .iter()
            .zip(&targets)
            .map(|(&x, &t)| x.max(T::zero()) - x * t + (T::one() + (-x.abs()).exp()).ln())
            .sum();
        let ng = self.needs(logits);
        Ok(self.push(vec![1], vec![loss], Op::BceSum { logits, targets }, ng))
    }

    /// out[i] = scale[i] · w[index[i]] for w of shape [rows, d].
    pub fn gather_scale(&mut self, w: Var, index: Vec<usize>, scale: Vec<T>) -> Result<Var, TensorError> {
        let (rows, d) = self.dims2(w, "gather_scale")?;
        if index.len() != scale.len() || index.iter().any(|&i| i >= rows) {
            return Err(TensorError::Shape {
                op: "gather_scale",
                left: vec![rows, d],
                right: vec![index.len(), scale.len()],
            });
        }
        let wv = self.value(w);
        let mut out = Vec::with_capacity(index.len() * d);
        for (&i, &s) in index.iter().zip(&scale) {
            out.extend(wv[i * d..(i + 1) * d].iter().map(|&x| x * s));
        }
        let ng = self.needs(w);
        Ok(self.push(vec![index.len(), d], out, Op::GatherScale { w, index, scale }, ng))
    }

    /// Multi-head masked scaled dot-product attention over a batch.
    ///
    /// `q` is [B·r, d], `k` and `v` are [B·c, d]; the r x c mask applies to
    /// every batch element and head. Each head uses the d/heads columns of its
    /// slot and scale 1/√(d/heads). Returns the [B·r, d] output.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        mask: &AttentionMask,
        heads: usize,
    ) -> Result<Var, TensorError> {
        let (qr, d) = self.dims2(q, "attention")?;
        let (kr, kd) = self.dims2(k, "attention")?;
        if self.shape(v) != [kr, kd] || kd != d {
            return Err(TensorError::Shape {
                op: "attention",
                left: vec![kr, kd],
                right: self.shape(v).to_vec(),
            });
        }
        if heads == 0 || d % heads != 0 {
            return Err(TensorError::HeadSplit { dim: d, heads });
        }
        let (r, c) = (mask.rows(), mask.cols());
        if qr % r != 0 || kr % c != 0 || qr / r != kr / c {
            return Err(TensorError::Shape {
                op: "attention",
                left: vec![qr, kr],
                right: vec![r, c],
            });
        }
        let batch = qr / r;
        let pattern = Arc::new(Pattern::from_mask(mask)?);
        let dh = d / heads;
        let scale = T::one() / T::from_f64(dh as f64).sqrt();
        let (offsets, nnz) = pattern.offsets();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut probs = vec![T::zero(); batch * heads * nnz];
        let mut out = vec![T::zero(); qr * d];
        for b in 0..batch {
            for h in 0..heads {
                let pbase = (b * heads + h) * nnz;
                for i in 0..r {
                    let qrow = &qv[(b * r + i) * d + h * dh..][..dh];
                    let open = &pattern.open[i];
                    let p = &mut probs[pbase + offsets[i]..][..open.len()];
                    let mut max = T::neg_infinity();
                    for (slot, &j) in open.iter().enumerate() {
                        let krow = &kv[(b * c + j) * d + h * dh..][..dh];
                        let s = qrow.iter().zip(krow).map(|(x, y)| *x * *y).sum::<T>() * scale;
                        p[slot] = s;
                        max = max.max(s);
                    }
                    let mut total = T::zero();
                    for s in p.iter_mut() {
                        *s = (*s - max).exp();
                        total += *s;
                    }
                    let orow = &mut out[(b * r + i) * d + h * dh..][..dh];
                    for (slot, &j) in open.iter().enumerate() {
                        p[slot] /= total;
                        let w = p[slot];
                        let vrow = &vv[(b * c + j) * d + h * dh..][..dh];
                        for (o, x) in orow.iter_mut().zip(vrow) {
                            *o += w * *x;
                        }
                    }
                }
            }
        }
        let ng = self.needs(q) || self.needs(k) || self.needs(v);
        Ok(self.push(
            vec![qr, d],
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                batch,
                pattern,
                probs,
            },
            ng,
        ))
    }

    /// Attention probabilities recorded by an [`Tape::attention`] node, as a
    /// dense [batch][heads][r·c] array (masked entries are exactly zero).
    pub fn attention_scores(&self, node: Var) -> Option<Vec<Vec<Vec<T>>>> {
        let Op::Attention {
            heads,
            batch,
            pattern,
            probs,
            ..
        } = &self.nodes[node.0].op
        else {
            return None;
        };
        let (offsets, nnz) = pattern.offsets();
        let (r, c) = (pattern.rows, pattern.cols);
        Some(
            (0..*batch)
                .map(|b| {
                    (0..*heads)
                        .map(|h| {
                            let base = (b * heads + h) * nnz;
                            let mut dense = vec![T::zero(); r * c];
                            for i in 0..r {
                                for (slot, &j) in pattern.open[i].iter().enumerate() {
                                    dense[i * c + j] = probs[base + offsets[i] + slot];
                                }
                            }
                            dense
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Back-propagates from the scalar `loss`, adding into the gradients of
    /// every parameter leaf. Gradients accumulate across calls until
    /// [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut g: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        g[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(go) = g[idx].take() else { continue };
            if !self.nodes[idx].needs_grad {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf) {
                let acc = self.grads[idx].get_or_insert_with(|| vec![T::zero(); go.len()]);
                for (a, x) in acc.iter_mut().zip(&go) {
                    *a += *x;
                }
                continue;
            }
            self.propagate(idx, &go, &mut g);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, go: &[T], g: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let nodes = &self.nodes;
        // Adds `delta` into the pending gradient of `v` if it needs one.
        let mut send = |v: Var, delta: Vec<T>| {
            if !nodes[v.0].needs_grad {
                return;
            }
            match &mut g[v.0] {
                Some(acc) => {
                    for (a, x) in acc.iter_mut().zip(delta) {
                        *a += x;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| nodes[v.0].value.as_slice();
        let needs = |v: Var| nodes[v.0].needs_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let n = nodes[b.0].shape[1];
                if needs(*a) {
                    let mut da = vec![T::zero(); m * k];
                    T::gemm(m, n, k, go, false, val(*b), true, &mut da, false);
                    send(*a, da);
                }
                if needs(*b) {
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, val(*a), true, go, false, &mut db, false);
                    send(*b, db);
                }
            }
            Op::Add(a, b) => {
                send(*a, go.to_vec());
                send(*b, go.to_vec());
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    send(*a, go.iter().zip(val(*b)).map(|(x, y)| *x * *y).collect());
                }
                if needs(*b) {
                    send(*b, go.iter().zip(val(*a)).map(|(x, y)| *x * *y).collect());
                }
            }
            Op::Scale(a, s) => send(*a, go.iter().map(|x| *x * *s).collect()),
            Op::AddRow(a, b) => {
                send(*a, go.to_vec());
                if needs(*b) {
                    let c = nodes[b.0].value.len();
                    let mut db = vec![T::zero(); c];
                    for row in go.chunks(c) {
                        for (d, x) in db.iter_mut().zip(row) {
                            *d += *x;
                        }
                    }
                    send(*b, db);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let mut da = vec![T::zero(); r * c];
                for i in 0..r {
                    for j in 0..c {
                        da[i * c + j] = go[j * r + i];
                    }
                }
                send(*a, da);
            }
            Op::Reshape(a) => send(*a, go.to_vec()),
            Op::Concat {
                a,
                b,
                outer,
                a_inner,
                b_inner,
            } => {
                let stride = a_inner + b_inner;
                if needs(*a) {
                    let mut da = Vec::with_capacity(outer * a_inner);
                    for o in 0..*outer {
                        da.extend_from_slice(&go[o * stride..o * stride + a_inner]);
                    }
                    send(*a, da);
                }
                if needs(*b) {
                    let mut db = Vec::with_capacity(outer * b_inner);
                    for o in 0..*outer {
                        db.extend_from_slice(&go[o * stride + a_inner..(o + 1) * stride]);
                    }
                    send(*b, db);
                }
            }
            Op::Sum(a) => send(*a, vec![go[0]; nodes[a.0].value.len()]),
            Op::Gelu { x, deriv } => send(*x, deriv.iter().zip(go).map(|(&p, &d)| p * d).collect()),
            Op::Sigmoid(a) => {
                send(
                    *a,
                    node.value
                        .iter()
                        .zip(go)
                        .map(|(&s, &d)| s * (T::one() - s) * d)
                        .collect(),
                )
            }
            Op::MaskedSoftmax { x, pattern } => {
                let cols = pattern.cols;
                let p = &node.value;
                let mut dx = vec![T::zero(); p.len()];
                for r in 0..p.len() / cols {
                    let open = &pattern.open[r % pattern.rows];
                    let dot: T = open.iter().map(|&c| p[r * cols + c] * go[r * cols + c]).sum();
                    for &c in open {
                        dx[r * cols + c] = p[r * cols + c] * (go[r * cols + c] - dot);
                    }
                }
                send(*x, dx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let cols = nodes[gain.0].value.len();
                let gv = val(*gain);
                if needs(*gain) || needs(*bias) {
                    let mut dg = vec![T::zero(); cols];
                    let mut db = vec![T::zero(); cols];
                    for (row_go, row_h) in go.chunks(cols).zip(xhat.chunks(cols)) {
                        for c in 0..cols {
                            dg[c] += row_go[c] * row_h[c];
                            db[c] += row_go[c];
                        }
                    }
                    send(*gain, dg);
                    send(*bias, db);
                }
                if needs(*x) {
                    let n = T::from_f64(cols as f64);
                    let mut dx = vec![T::zero(); go.len()];
                    for (r, is) in inv_std.iter().enumerate() {
                        let row_go = &go[r * cols..(r + 1) * cols];
                        let row_h = &xhat[r * cols..(r + 1) * cols];
                        let mut mean_dh = T::zero();
                        let mut mean_dh_h = T::zero();
                        for c in 0..cols {
                            let dh = row_go[c] * gv[c];
                            mean_dh += dh;
                            mean_dh_h += dh * row_h[c];
                        }
                        mean_dh /= n;
                        mean_dh_h /= n;
                        for c in 0..cols {
                            let dh = row_go[c] * gv[c];
                            dx[r * cols + c] = *is * (dh - mean_dh - row_h[c] * mean_dh_h);
                        }
                    }
                    send(*x, dx);
                }
            }
            Op::BceSum { logits, targets } => {
                let d = go[0];
                send(
                    *logits,
                    val(*logits)
                        .iter()
                        .zip(targets)
                        .map(|(&x, &t)| (sigmoid(x) - t) * d)
                        .collect(),
                );
            }
            Op::GatherScale { w, index, scale } => {
                let d = nodes[w.0].shape[1];
                let mut dw = vec![T::zero(); nodes[w.0].value.len()];
                for (row, (&i, &s)) in index.iter().zip(scale).enumerate() {
                    for (a, x) in dw[i * d..(i + 1) * d].iter_mut().zip(&go[row * d..(row + 1) * d]) {
                        *a += *x * s;
                    }
                }
                send(*w, dw);
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                batch,
                pattern,
                probs,
            } => {
                let d = nodes[q.0].shape[1];
                let (r, c) = (pattern.rows, pattern.cols);
                let dh = d / heads;
                let scale = T::one() / T::from_f64(dh as f64).sqrt();
                let (offsets, nnz) = pattern.offsets();
                let (qv, kv, vv) = (val(*q), val(*k), val(*v));
                let mut dq = vec![T::zero(); qv.len()];
                let mut dk = vec![T::zero(); kv.len()];
                let mut dv = vec![T::zero(); vv.len()];
                let mut dp = Vec::new();
                for b in 0..*batch {
                    for h in 0..*heads {
                        let pbase = (b * heads + h) * nnz;
                        for i in 0..r {
                            let open = &pattern.open[i];
                            let p = &probs[pbase + offsets[i]..][..open.len()];
                            let gorow = &go[(b * r + i) * d + h * dh..][..dh];
                            dp.clear();
                            let mut dot = T::zero();
                            for (slot, &j) in open.iter().enumerate() {
                                let vrow = &vv[(b * c + j) * d + h * dh..][..dh];
                                let s: T = gorow.iter().zip(vrow).map(|(x, y)| *x * *y).sum();
                                dp.push(s);
                                dot += s * p[slot];
                                let dvrow = &mut dv[(b * c + j) * d + h * dh..][..dh];
                                for (a, x) in dvrow.iter_mut().zip(gorow) {
                                    *a += p[slot] * *x;
                                }
                            }
                            let qrow = &qv[(b * r + i) * d + h * dh..][..dh];
                            for (slot, &j) in open.iter().enumerate() {
                                let ds = p[slot] * (dp[slot] - dot) * scale;
                                let krow = &kv[(b * c + j) * d + h * dh..][..dh];
                                let dqrow = &mut dq[(b * r + i) * d + h * dh..][..dh];
                                for (a, x) in dqrow.iter_mut().zip(krow) {
                                    *a += ds * *x;
                                }
                                let dkrow = &mut dk[(b * c + j) * d + h * dh..][..dh];
                                for (a, x) in dkrow.iter_mut().zip(qrow) {
                                    *a += ds * *x;
                                }
                            }
                        }
                    }
                }
                send(*q, dq);
                send(*k, dk);
                send(*v, dv);
            }
        }
    }
}
