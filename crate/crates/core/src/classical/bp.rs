use super::{DecodeError, DecodeResult};
use crate::codes::{hard_decision, BitMatrix, HardWord, LinearCode};

/// Largest |tanh| fed to atanh, keeping check messages finite.
const TANH_CLAMP: f64 = 1.0 - 1e-12;

/// Bipartite adjacency of a parity-check matrix. Edges are numbered check
/// by check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    /// Bits of each check.
    check_bits: Vec<Vec<usize>>,
    /// Checks of each bit.
    bit_checks: Vec<Vec<usize>>,
    /// Edge range of each check.
    check_edges: Vec<std::ops::Range<usize>>,
    /// Bit endpoint of each edge.
    edge_bit: Vec<usize>,
}

impl TannerGraph {
    pub fn new(h: &BitMatrix) -> Self {
        let check_bits: Vec<Vec<usize>> = (0..h.rows()).map(|r| h.row_support(r)).collect();
        let bit_checks = (0..h.cols()).map(|c| h.col_support(c)).collect();
        let mut check_edges = Vec::with_capacity(check_bits.len());
        let mut edge_bit = Vec::new();
        for bits in &check_bits {
            let start = edge_bit.len();
            edge_bit.extend_from_slice(bits);
            check_edges.push(start..edge_bit.len());
        }
        TannerGraph {
            n: h.cols(),
            check_bits,
            bit_checks,
            check_edges,
            edge_bit,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn checks(&self) -> usize {
        self.check_bits.len()
    }

    pub fn edges(&self) -> usize {
        self.edge_bit.len()
    }

    pub fn check_bits(&self, check: usize) -> &[usize] {
        &self.check_bits[check]
    }

    pub fn bit_checks(&self, bit: usize) -> &[usize] {
        &self.bit_checks[bit]
    }

    fn satisfied(&self, word: &[u8]) -> bool {
        self.check_bits
            .iter()
            .all(|bits| bits.iter().fold(0u8, |acc, &b| acc ^ word[b]) == 0)
    }
}

/// Check-node rule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BpVariant {
    #[default]
    SumProduct,
    MinSum,
    /// Min-sum with outgoing magnitudes multiplied by the factor.
    ScaledMinSum(f64),
}

/// BP decoder bound to one graph, reusable across frames.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    graph: TannerGraph,
    pub max_iter: usize,
    pub variant: BpVariant,
}

impl BpDecoder {
    pub fn new(h: &BitMatrix, max_iter: usize, variant: BpVariant) -> Result<Self, DecodeError> {
        if max_iter == 0 {
            return Err(DecodeError::NoIterations);
        }
        Ok(BpDecoder {
            graph: TannerGraph::new(h),
            max_iter,
            variant,
        })
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    /// Decodes from channel LLRs (positive favours bit 0).
    pub fn decode_llr(&self, llr: &[f64]) -> Result<DecodeResult, DecodeError> {
        let g = &self.graph;
        if llr.len() != g.n {
            return Err(DecodeError::LengthMismatch {
                expected: g.n,
                got: llr.len(),
            });
        }
        let mut bits = hard_decision(llr)?.into_bits();
        if g.satisfied(&bits) {
            return Ok(DecodeResult {
                bits: HardWord::new(bits)?,
                soft: Some(llr.to_vec()),
                converged: true,
                iterations_used: 0,
            });
        }
        let mut v2c: Vec<f64> = g.edge_bit.iter().map(|&b| llr[b]).collect();
        let mut c2v = vec![0.0; g.edges()];
        let mut total = llr.to_vec();
        let mut scratch = Vec::new();
        for iter in 1..=self.max_iter {
            for range in &g.check_edges {
                let incoming = &v2c[range.clone()];
                let out = &mut c2v[range.clone()];
                match self.variant {
                    BpVariant::SumProduct => check_sum_product(incoming, out, &mut scratch),
                    BpVariant::MinSum => check_min_sum(incoming, out, 1.0),
                    BpVariant::ScaledMinSum(s) => check_min_sum(incoming, out, s),
                }
            }
            total.copy_from_slice(llr);
            for (e, &b) in g.edge_bit.iter().enumerate() {
                total[b] += c2v[e];
            }
            for (e, &b) in g.edge_bit.iter().enumerate() {
                v2c[e] = total[b] - c2v[e];
            }
            for (bit, &t) in bits.iter_mut().zip(&total) {
                *bit = u8::from(t < 0.0);
            }
            if g.satisfied(&bits) {
                return Ok(DecodeResult {
                    bits: HardWord::new(bits)?,
                    soft: Some(total),
                    converged: true,
                    iterations_used: iter,
                });
            }
        }
        Ok(DecodeResult {
            bits: HardWord::new(bits)?,
            soft: Some(total),
            converged: false,
            iterations_used: self.max_iter,
        })
    }

    /// Decodes a received BPSK word using LLRs 2y/σ².
    pub fn decode(&self, y: &[f64], sigma: f64) -> Result<DecodeResult, DecodeError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(DecodeError::InvalidSigma(sigma));
        }
        let scale = 2.0 / (sigma * sigma);
        let llr: Vec<f64> = y.iter().map(|&v| v * scale).collect();
        self.decode_llr(&llr)
    }
}

/// tanh rule with exclusive products from prefix/suffix scans, so zero
/// messages need no special casing.
fn check_sum_product(incoming: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    let deg = incoming.len();
    scratch.clear();
    scratch.extend(incoming.iter().map(|&m| (0.5 * m).tanh()));
    let mut prefix = 1.0;
    for i in 0..deg {
        out[i] = prefix;
        prefix *= scratch[i];
    }
    let mut suffix = 1.0;
    for i in (0..deg).rev() {
        let p = (out[i] * suffix).clamp(-TANH_CLAMP, TANH_CLAMP);
        out[i] = 2.0 * p.atanh();
        suffix *= scratch[i];
    }
}

fn check_min_sum(incoming: &[f64], out: &mut [f64], scale: f64) {
    let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, 0);
    let mut negatives = 0usize;
    for (i, &m) in incoming.iter().enumerate() {
        let a = m.abs();
        if m < 0.0 {
            negatives += 1;
        }
        if a < min1 {
            min2 = min1;
            min1 = a;
            argmin = i;
        } else if a < min2 {
            min2 = a;
        }
    }
    for (i, (o, &m)) in out.iter_mut().zip(incoming).enumerate() {
        let others_negative = negatives - usize::from(m < 0.0);
        let sign = if others_negative.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mag = if i == argmin { min2 } else { min1 };
        *o = if mag.is_finite() { sign * scale * mag } else { 0.0 };
    }
}

/// One-shot BP decode of `y` received at noise level `sigma`.
pub fn bp_decode(
    code: &LinearCode,
    y: &[f64],
    sigma: f64,
    max_iter: usize,
    variant: BpVariant,
) -> Result<DecodeResult, DecodeError> {
    BpDecoder::new(code.pcm(), max_iter, variant)?.decode(y, sigma)
}
