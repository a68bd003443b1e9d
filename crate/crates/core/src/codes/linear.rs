use std::ops::Deref;

use super::{BitMatrix, CodeError};

/// Binary word of length n with entries in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct HardWord(Vec<u8>);

impl HardWord {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodeError> {
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(CodeError::NotABit { index, value });
        }
        Ok(HardWord(bits))
    }

    pub fn zeros(n: usize) -> Self {
        HardWord(vec![0; n])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    pub fn xor(&self, other: &HardWord) -> HardWord {
        debug_assert_eq!(self.0.len(), other.0.len());
        HardWord(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Number of positions where the two words differ.
    pub fn distance(&self, other: &HardWord) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl Deref for HardWord {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// What to do when the loaded PCM has linearly dependent rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RedundantRows {
    /// Fail with [`CodeError::RankDeficient`].
    #[default]
    Reject,
    /// Drop dependent rows (greedy, in row order) before anything else.
    Drop,
    /// Keep H exactly as loaded; k is n - rank(H).
    Keep,
}

/// A binary linear block code: PCM, generator and the column permutation
/// that makes the generator systematic.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCode {
    name: String,
    n: usize,
    k: usize,
    h: BitMatrix,
    g: BitMatrix,
    col_perm: Vec<usize>,
}

/// Derives a generator for the code with parity-check matrix `h`.
///
/// The returned permutation lists original column indices such that the
/// columns of `G` taken in that order form `[I_k | P]`.
pub fn derive_generator(h: &BitMatrix) -> Result<(BitMatrix, Vec<usize>), CodeError> {
    let rank = h.rank();
    if rank < h.rows() {
        return Err(CodeError::RankDeficient {
            rank,
            rows: h.rows(),
        });
    }
    generator_from_rref(h)
}

fn generator_from_rref(h: &BitMatrix) -> Result<(BitMatrix, Vec<usize>), CodeError> {
    let n = h.cols();
    let (reduced, pivots) = h.rref();
    let rank = pivots.len();
    if rank >= n {
        return Err(CodeError::NoMessageBits { rank, n });
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let mut g = BitMatrix::zeros(free.len(), n)?;
    for (row, &f) in free.iter().enumerate() {
        g.set(row, f, true);
        for (i, &p) in pivots.iter().enumerate() {
            if reduced.get(i, f) {
                g.set(row, p, true);
            }
        }
    }
    let col_perm = free.iter().chain(pivots.iter()).copied().collect();
    Ok((g, col_perm))
}

impl LinearCode {
    /// Builds a code from its parity-check matrix.
    pub fn from_pcm(
        name: impl Into<String>,
        h: BitMatrix,
        policy: RedundantRows,
    ) -> Result<Self, CodeError> {
        let rank = h.rank();
        let h = if rank < h.rows() {
            match policy {
                RedundantRows::Reject => {
                    return Err(CodeError::RankDeficient {
                        rank,
                        rows: h.rows(),
                    })
                }
                RedundantRows::Drop => h.select_rows(&h.independent_rows())?,
                RedundantRows::Keep => h,
            }
        } else {
            h
        };
        let (g, col_perm) = generator_from_rref(&h)?;
        Ok(LinearCode {
            name: name.into(),
            n: h.cols(),
            k: g.rows(),
            h,
            g,
            col_perm,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length (code dimension).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of rows of H as loaded; equals n - k unless redundant rows
    /// were kept.
    pub fn checks(&self) -> usize {
        self.h.rows()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn pcm(&self) -> &BitMatrix {
        &self.h
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.g
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// x = mG over GF(2).
    pub fn encode(&self, message: &[u8]) -> Result<HardWord, CodeError> {
        if message.len() != self.k {
            return Err(CodeError::LengthMismatch {
                expected: self.k,
                got: message.len(),
            });
        }
        HardWord::new(self.g.vec_mul(message)?)
    }

    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>, CodeError> {
        syndrome(word, &self.h)
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.syndrome(word).is_ok_and(|s| s.iter().all(|&b| b == 0))
    }

    /// All 2^k codewords in message-enumeration order (message bit 0 is the
    /// least significant bit of the index).
    pub fn codewords(&self) -> impl Iterator<Item = HardWord> + '_ {
        (0u64..1 << self.k).map(move |idx| {
            let m: Vec<u8> = (0..self.k).map(|i| ((idx >> i) & 1) as u8).collect();
            self.encode(&m).expect("message length is k")
        })
    }
}

/// s = H · y_bᵀ over GF(2).
pub fn syndrome(word: &[u8], h: &BitMatrix) -> Result<Vec<u8>, CodeError> {
    h.mul_vec(word)
}

/// bin(sign(y)): bit i is 0 when y_i >= 0 and 1 otherwise (sign(0) = +1).
pub fn hard_decision(y: &[f64]) -> Result<HardWord, CodeError> {
    y.iter()
        .enumerate()
        .map(|(index, &v)| {
            if v.is_finite() {
                Ok(u8::from(v < 0.0))
            } else {
                Err(CodeError::NonFinite { index })
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(HardWord)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming_h() -> BitMatrix {
        BitMatrix::from_rows(&[
            [1u8, 0, 1, 0, 1, 0, 1],
            [0, 1, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn hamming_generator_enumerates_16_codewords() {
        let code = LinearCode::from_pcm("ham", hamming_h(), RedundantRows::Reject).unwrap();
        assert_eq!((code.n(), code.k(), code.checks()), (7, 4, 3));
        assert!(code.generator().mul(&code.pcm().transpose()).unwrap().is_zero());
        let words: std::collections::HashSet<_> = code.codewords().collect();
        assert_eq!(words.len(), 16);
        for w in &words {
            // Independent mod-2 dot products against each check.
            for r in 0..3 {
                let dot: u8 = (0..7).map(|c| w[c] & hamming_h().get(r, c) as u8).sum();
                assert_eq!(dot % 2, 0);
            }
        }
    }

    #[test]
    fn systematic_under_permutation() {
        let code = LinearCode::from_pcm("ham", hamming_h(), RedundantRows::Reject).unwrap();
        let perm = code.col_perm();
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(code.generator().get(r, perm[c]), r == c);
            }
        }
    }

    #[test]
    fn unit_message_gives_generator_row() {
        let code = LinearCode::from_pcm("ham", hamming_h(), RedundantRows::Reject).unwrap();
        assert_eq!(code.encode(&[1, 0, 0, 0]).unwrap().bits(), code.generator().row(0));
        assert_eq!(code.encode(&[0; 4]).unwrap(), HardWord::zeros(7));
        assert!(code.encode(&[1, 0]).is_err());
    }

    #[test]
    fn identity_pcm_has_no_messages() {
        let h = BitMatrix::identity(4).unwrap();
        assert_eq!(
            derive_generator(&h).unwrap_err(),
            CodeError::NoMessageBits { rank: 4, n: 4 }
        );
    }

    #[test]
    fn single_check_dual() {
        let h = BitMatrix::from_rows(&[[1u8, 1]]).unwrap();
        let (g, _) = derive_generator(&h).unwrap();
        assert_eq!(g, BitMatrix::from_rows(&[[1u8, 1]]).unwrap());
    }

    #[test]
    fn redundant_rows_policies() {
        let h = BitMatrix::from_rows(&[[1u8, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 0]]).unwrap();
        assert_eq!(
            LinearCode::from_pcm("r", h.clone(), RedundantRows::Reject).unwrap_err(),
            CodeError::RankDeficient { rank: 2, rows: 3 }
        );
        assert_eq!(
            derive_generator(&h).unwrap_err(),
            CodeError::RankDeficient { rank: 2, rows: 3 }
        );
        let dropped = LinearCode::from_pcm("r", h.clone(), RedundantRows::Drop).unwrap();
        assert_eq!((dropped.k(), dropped.checks()), (2, 2));
        let kept = LinearCode::from_pcm("r", h, RedundantRows::Keep).unwrap();
        assert_eq!((kept.k(), kept.checks()), (2, 3));
        for w in kept.codewords() {
            assert!(kept.is_codeword(&w));
        }
    }

    #[test]
    fn hard_decision_conventions() {
        assert_eq!(hard_decision(&[0.3, -1.2, 0.0]).unwrap().bits(), &[0, 1, 0]);
        assert_eq!(hard_decision(&[1.0, 2.0]).unwrap().weight(), 0);
        assert_eq!(hard_decision(&[-0.0]).unwrap().bits(), &[0]);
        assert_eq!(
            hard_decision(&[1.0, f64::NAN]).unwrap_err(),
            CodeError::NonFinite { index: 1 }
        );
        let y = [0.5, -0.25, 0.0, 3.0];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = hard_decision(&y).unwrap();
        let b = hard_decision(&neg).unwrap();
        for i in 0..4 {
            if y[i] == 0.0 {
                assert_eq!(a[i], b[i]);
            } else {
                assert_eq!(a[i], 1 - b[i]);
            }
        }
    }

    #[test]
    fn flipped_bit_syndrome_is_column() {
        let code = LinearCode::from_pcm("ham", hamming_h(), RedundantRows::Reject).unwrap();
        let x = code.encode(&[1, 0, 1, 1]).unwrap();
        assert!(code.syndrome(&x).unwrap().iter().all(|&b| b == 0));
        for i in 0..7 {
            let mut y = x.bits().to_vec();
            y[i] ^= 1;
            let col: Vec<u8> = (0..3).map(|r| hamming_h().get(r, i) as u8).collect();
            assert_eq!(code.syndrome(&y).unwrap(), col);
        }
        assert!(code.syndrome(&[0; 6]).is_err());
    }
}
