//! Additive attention masks derived from a parity-check matrix.
//!
//! A mask entry is `0` where attention is allowed and `-inf` where it is
//! blocked. With `m` rows in H (m = n - k for a full-rank PCM):
//!
//! * cross-attention: `m2s` is n x m (bits query checks, `g(Hᵀ)`), `s2m` is
//!   m x n (checks query bits, `g(H)`);
//! * self-attention baseline: one (n+m) x (n+m) map, bits connected at depth 2
//!   in the Tanner graph.

use crate::codes::BitMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    rows: usize,
    cols: usize,
    open: Vec<bool>,
    unmasked_count: usize,
}

impl AttentionMask {
    pub fn from_fn(rows: usize, cols: usize, mut allowed: impl FnMut(usize, usize) -> bool) -> Self {
        let mut open = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                open.push(allowed(r, c));
            }
        }
        let unmasked_count = open.iter().filter(|&&o| o).count();
        AttentionMask {
            rows,
            cols,
            open,
            unmasked_count,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn unmasked_count(&self) -> usize {
        self.unmasked_count
    }

    #[inline]
    pub fn is_open(&self, r: usize, c: usize) -> bool {
        self.open[r * self.cols + c]
    }

    /// Additive value at (r, c): `0.0` or `f64::NEG_INFINITY`.
    #[inline]
    pub fn additive(&self, r: usize, c: usize) -> f64 {
        if self.is_open(r, c) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Row-major additive matrix.
    pub fn additive_matrix(&self) -> Vec<f64> {
        self.open
            .iter()
            .map(|&o| if o { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    }

    pub fn open_flags(&self) -> &[bool] {
        &self.open
    }

    /// Sparse form: the open columns of every row.
    pub fn open_indices(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|r| (0..self.cols).filter(|&c| self.is_open(r, c)).collect())
            .collect()
    }

    /// Index of the first row with no open entry, if any.
    pub fn first_closed_row(&self) -> Option<usize> {
        (0..self.rows).find(|&r| !self.open[r * self.cols..(r + 1) * self.cols].iter().any(|&o| o))
    }

    pub fn transpose(&self) -> AttentionMask {
        AttentionMask::from_fn(self.cols, self.rows, |r, c| self.is_open(c, r))
    }

    /// Count of open entries inside the block `[r0, r1) x [c0, c1)`.
    pub fn count_block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> usize {
        (r0..r1)
            .map(|r| (c0..c1).filter(|&c| self.is_open(r, c)).count())
            .sum()
    }
}

/// Exact density as a fraction plus its floating value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub unmasked: usize,
    pub total: usize,
}

impl Density {
    pub fn value(&self) -> f64 {
        self.unmasked as f64 / self.total as f64
    }

    /// Percentage rounded to two decimals.
    pub fn percent_2dp(&self) -> f64 {
        (self.value() * 10_000.0).round() / 100.0
    }
}

pub fn mask_density(mask: &AttentionMask) -> Density {
    Density {
        unmasked: mask.unmasked_count,
        total: mask.rows * mask.cols,
    }
}

/// The pair of cross-attention masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub m2s: AttentionMask,
    pub s2m: AttentionMask,
}

impl MaskSet {
    /// Density over both maps combined: ones(H) / (n·m).
    pub fn density(&self) -> Density {
        Density {
            unmasked: self.m2s.unmasked_count + self.s2m.unmasked_count,
            total: self.m2s.rows * self.m2s.cols + self.s2m.rows * self.s2m.cols,
        }
    }
}

pub fn build_crossmpt_masks(h: &BitMatrix) -> MaskSet {
    let s2m = AttentionMask::from_fn(h.rows(), h.cols(), |j, i| h.get(j, i));
    let m2s = AttentionMask::from_fn(h.cols(), h.rows(), |i, j| h.get(j, i));
    MaskSet { m2s, s2m }
}

/// Self-attention mask over the concatenated [bits; checks] sequence.
///
/// Blocks: MM open on the diagonal and for bit pairs sharing a check; MS / SM
/// open where H has a one; SS open on the diagonal only. With
/// `ablate_self_blocks`, MM keeps only its diagonal and SS is fully closed.
pub fn build_ecct_mask(h: &BitMatrix, ablate_self_blocks: bool) -> AttentionMask {
    let n = h.cols();
    let m = h.rows();
    let mut shares = vec![false; n * n];
    for r in 0..m {
        let support = h.row_support(r);
        for &a in &support {
            for &b in &support {
                shares[a * n + b] = true;
            }
        }
    }
    AttentionMask::from_fn(n + m, n + m, |r, c| match (r < n, c < n) {
        (true, true) => r == c || (!ablate_self_blocks && shares[r * n + c]),
        (true, false) => h.get(c - n, r),
        (false, true) => h.get(r - n, c),
        (false, false) => !ablate_self_blocks && r == c,
    })
}

/// Per-code summary used by the `mask-stats` report.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStats {
    pub n: usize,
    pub checks: usize,
    /// Self-attention baseline density.
    pub rho1: Density,
    /// Cross-attention density.
    pub rho2: Density,
    pub mm_unmasked: usize,
    pub ms_unmasked: usize,
    pub ss_unmasked: usize,
}

pub fn mask_stats(h: &BitMatrix) -> MaskStats {
    let n = h.cols();
    let m = h.rows();
    let ecct = build_ecct_mask(h, false);
    let cross = build_crossmpt_masks(h);
    MaskStats {
        n,
        checks: m,
        rho1: mask_density(&ecct),
        rho2: cross.density(),
        mm_unmasked: ecct.count_block(0, n, 0, n),
        ms_unmasked: ecct.count_block(0, n, n, n + m),
        ss_unmasked: ecct.count_block(n, n + m, n, n + m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> BitMatrix {
        BitMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1]]).unwrap()
    }

    #[test]
    fn all_ones_pcm_fully_open() {
        let h = BitMatrix::from_rows(&[[1u8, 1]]).unwrap();
        let set = build_crossmpt_masks(&h);
        assert_eq!((set.m2s.rows(), set.m2s.cols()), (2, 1));
        assert_eq!(set.m2s.unmasked_count(), 2);
        assert_eq!(set.s2m.unmasked_count(), 2);
    }

    #[test]
    fn zero_entry_blocks_attention() {
        let h = BitMatrix::from_rows(&[[1u8, 0]]).unwrap();
        let set = build_crossmpt_masks(&h);
        assert_eq!(set.m2s.additive(1, 0), f64::NEG_INFINITY);
        assert_eq!(set.m2s.additive(0, 0), 0.0);
        assert_eq!(set.m2s.first_closed_row(), Some(1));
    }

    #[test]
    fn tree_ecct_counts() {
        let mask = build_ecct_mask(&tree(), false);
        assert_eq!(mask.rows(), 5);
        assert_eq!(mask.count_block(0, 3, 0, 3), 7);
        assert_eq!(mask.count_block(0, 3, 3, 5), 4);
        assert_eq!(mask.count_block(3, 5, 0, 3), 4);
        assert_eq!(mask.count_block(3, 5, 3, 5), 2);
        let d = mask_density(&mask);
        assert_eq!((d.unmasked, d.total), (17, 25));
        assert_eq!(d.percent_2dp(), 68.0);
    }

    #[test]
    fn ablation_keeps_cross_blocks() {
        let mask = build_ecct_mask(&tree(), true);
        assert_eq!(mask.count_block(0, 3, 0, 3), 3);
        assert_eq!(mask.count_block(0, 3, 3, 5), 4);
        assert_eq!(mask.count_block(3, 5, 3, 5), 0);
    }

    #[test]
    fn all_ones_ecct_open_except_ss_offdiag() {
        let h = BitMatrix::from_rows(&[[1u8, 1, 1], [1, 1, 1]]).unwrap();
        let mask = build_ecct_mask(&h, false);
        for r in 0..5 {
            for c in 0..5 {
                let closed = r >= 3 && c >= 3 && r != c;
                assert_eq!(mask.is_open(r, c), !closed);
            }
        }
    }

    #[test]
    fn all_closed_density_zero() {
        let m = AttentionMask::from_fn(3, 4, |_, _| false);
        assert_eq!(mask_density(&m).value(), 0.0);
    }

    #[test]
    fn cross_density_is_pcm_density() {
        let h = tree();
        let set = build_crossmpt_masks(&h);
        assert_eq!(set.m2s, set.s2m.transpose());
        let d = set.density();
        assert_eq!((d.unmasked, d.total), (2 * h.count_ones(), 2 * 3 * 2));
        assert_eq!(d.value(), 4.0 / 6.0);
        assert_eq!(mask_density(&set.m2s).value(), 4.0 / 6.0);
    }
}
