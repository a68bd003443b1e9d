//! Operation counts for one forward pass.
//!
//! One multiply-accumulate is 2 FLOPs. Per layer, with L = 2n − k sequence
//! positions and embedding width d:
//!
//! * Q/K/V/output projections: 8·d²·L (both decoders; the cross-attention
//!   decoder projects n + (n − k) rows across its two blocks).
//! * Attention (scores plus weighted sum): 4·d·A, where A is the score-map
//!   area. Dense: A = L² for the self-attention baseline and
//!   A = 2·n·(n − k) for the two cross maps. Mask-aware: A = h = ρ₁·L² or
//!   A = h₁ + h₂ = 2·ρ₂·n·(n − k).
//! * Feed-forward: 4·r·d²·L for width multiplier r.
//! * Elementwise work (softmax, two norms, GELU) one FLOP per element.
//!
//! `table_flops` is the projection plus dense attention term of a single
//! layer, which is the figure the published complexity table lists.

use crate::codes::BitMatrix;
use crate::masks::mask_stats;
use crate::model::{Arch, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFlops {
    pub arch: Arch,
    /// Mask density as a fraction.
    pub rho: f64,
    /// h for the baseline, (h₁, h₂) for the cross-attention decoder.
    pub h_terms: Vec<f64>,
    pub table_flops: f64,
    pub projections: f64,
    pub attention_dense: f64,
    pub attention_mask_aware: f64,
    pub ffnn: f64,
    pub elementwise: f64,
    pub head: f64,
    /// Full forward pass with dense attention.
    pub total_dense: f64,
    pub total_mask_aware: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopsReport {
    pub n: usize,
    pub k: usize,
    pub num_layers: usize,
    pub embed_dim: usize,
    pub crossmpt: ModelFlops,
    pub ecct: ModelFlops,
}

impl FlopsReport {
    pub fn ratio(&self) -> f64 {
        self.crossmpt.table_flops / self.ecct.table_flops
    }

    pub const CSV_HEADER: &'static str = "n,k,N,d,arch,rho,h_terms,table_flops,attention_dense,attention_mask_aware,total_dense,total_mask_aware";

    pub fn csv_rows(&self) -> String {
        [&self.crossmpt, &self.ecct]
            .iter()
            .map(|m| {
                let h: Vec<String> = m.h_terms.iter().map(|v| format!("{v}")).collect();
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    self.n,
                    self.k,
                    self.num_layers,
                    self.embed_dim,
                    m.arch.as_str(),
                    m.rho,
                    h.join(";"),
                    m.table_flops,
                    m.attention_dense,
                    m.attention_mask_aware,
                    m.total_dense,
                    m.total_mask_aware
                )
            })
            .collect()
    }
}

/// Counts for both decoders from code dimensions and mask densities
/// (fractions, not percentages).
#[allow(clippy::too_many_arguments)]
pub fn flops_estimate(
    n: usize,
    k: usize,
    num_layers: usize,
    embed_dim: usize,
    ffnn_multiplier: usize,
    heads: usize,
    rho1: f64,
    rho2: f64,
) -> FlopsReport {
    let (nf, kf, d, r) = (n as f64, k as f64, embed_dim as f64, ffnn_multiplier as f64);
    let layers = num_layers as f64;
    let len = 2.0 * nf - kf;
    let m = nf - kf;
    let projections = 8.0 * d * d * len;
    let ffnn = 4.0 * r * d * d * len;
    let head = 2.0 * d * len + 2.0 * len * nf;
    let norms_and_gelu = 2.0 * len * d + r * d * len;

    let build = |arch: Arch, rho: f64, h_terms: Vec<f64>, dense_area: f64| {
        let area: f64 = h_terms.iter().sum();
        let attention_dense = 4.0 * d * dense_area;
        let attention_mask_aware = 4.0 * d * area;
        let softmax = heads as f64 * dense_area;
        let elementwise = layers * (softmax + norms_and_gelu) + len * d;
        let per_layer = projections + ffnn;
        ModelFlops {
            arch,
            rho,
            h_terms,
            table_flops: projections + attention_dense,
            projections,
            attention_dense,
            attention_mask_aware,
            ffnn,
            elementwise,
            head,
            total_dense: layers * (per_layer + attention_dense) + elementwise + head,
            total_mask_aware: layers * (per_layer + attention_mask_aware) + elementwise + head,
        }
    };
    FlopsReport {
        n,
        k,
        num_layers,
        embed_dim,
        crossmpt: build(Arch::CrossMpt, rho2, vec![rho2 * nf * m, rho2 * m * nf], 2.0 * nf * m),
        ecct: build(Arch::Ecct, rho1, vec![rho1 * len * len], len * len),
    }
}

/// [`flops_estimate`] with densities measured from the loaded PCM.
pub fn flops_for_code(h: &BitMatrix, k: usize, config: &ModelConfig) -> FlopsReport {
    let stats = mask_stats(h);
    flops_estimate(
        h.cols(),
        k,
        config.num_layers,
        config.embed_dim,
        config.ffnn_multiplier,
        config.heads,
        stats.rho1.value(),
        stats.rho2.value(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bch_63_45_matches_closed_form() {
        let r = flops_estimate(63, 45, 6, 128, 4, 8, 0.5309, 0.3245);
        assert_eq!(r.ecct.table_flops, 8.0 * 128.0 * 128.0 * 81.0 + 4.0 * 128.0 * 81.0 * 81.0);
        assert_eq!(r.crossmpt.table_flops, 8.0 * 128.0 * 128.0 * 81.0 + 8.0 * 128.0 * 63.0 * 18.0);
        assert!((r.crossmpt.table_flops / 1e6 - 11.8).abs() < 0.1);
        assert!((r.ecct.table_flops / 1e6 - 14.0).abs() < 0.1);
    }

    #[test]
    fn mask_aware_never_exceeds_dense() {
        for (rho1, rho2) in [(1.0, 1.0), (0.5, 0.3), (0.1, 0.05)] {
            let r = flops_estimate(31, 16, 2, 32, 4, 8, rho1, rho2);
            for m in [&r.crossmpt, &r.ecct] {
                assert!(m.attention_mask_aware <= m.attention_dense);
                assert!(m.total_mask_aware <= m.total_dense);
            }
        }
    }

    #[test]
    fn h_terms_are_symmetric() {
        let r = flops_estimate(121, 70, 6, 128, 4, 8, 0.2401, 0.0909);
        assert_eq!(r.crossmpt.h_terms[0], r.crossmpt.h_terms[1]);
        assert!((r.ecct.h_terms[0] - 0.2401 * 172.0 * 172.0).abs() < 1e-9);
    }
}
