use super::{DecodeError, DecodeResult};
use crate::codes::{HardWord, LinearCode};

/// Largest message length searched exhaustively.
pub const ML_MAX_K: usize = 24;

/// Nearest-codeword decoder. Codewords are visited in Gray-code order, each
/// one a single generator-row XOR away from the previous.
#[derive(Debug, Clone)]
pub struct MlDecoder {
    n: usize,
    k: usize,
    /// Generator rows.
    rows: Vec<Vec<u8>>,
}

impl MlDecoder {
    pub fn new(code: &LinearCode) -> Result<Self, DecodeError> {
        if code.k() > ML_MAX_K {
            return Err(DecodeError::TooManyMessages {
                k: code.k(),
                limit: ML_MAX_K,
            });
        }
        let g = code.generator();
        Ok(MlDecoder {
            n: code.n(),
            k: code.k(),
            rows: (0..g.rows()).map(|r| g.row(r)).collect(),
        })
    }

    /// argmin over codewords of ‖y − bpsk(x)‖². Ties go to the smaller
    /// message index (message bit i = bit i of the index).
    pub fn decode(&self, y: &[f64]) -> Result<DecodeResult, DecodeError> {
        if y.len() != self.n {
            return Err(DecodeError::LengthMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        let mut word = vec![0u8; self.n];
        let dist = |w: &[u8]| -> f64 {
            w.iter()
                .zip(y)
                .map(|(&b, &v)| {
                    let e = v - if b == 0 { 1.0 } else { -1.0 };
                    e * e
                })
                .sum()
        };
        let mut best = (dist(&word), 0u64, word.clone());
        for i in 1u64..(1u64 << self.k) {
            let row = &self.rows[i.trailing_zeros() as usize];
            for (w, &r) in word.iter_mut().zip(row) {
                *w ^= r;
            }
            let index = i ^ (i >> 1);
            let d = dist(&word);
            if d < best.0 || (d == best.0 && index < best.1) {
                best = (d, index, word.clone());
            }
        }
        Ok(DecodeResult {
            bits: HardWord::new(best.2)?,
            soft: None,
            converged: true,
            iterations_used: 0,
        })
    }
}

pub fn ml_decode(code: &LinearCode, y: &[f64]) -> Result<DecodeResult, DecodeError> {
    MlDecoder::new(code)?.decode(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::modulate_bpsk;
    use crate::codes::BitMatrix;
    use crate::RedundantRows;

    fn hamming() -> LinearCode {
        let h = BitMatrix::from_rows(&[
            [1u8, 0, 1, 0, 1, 0, 1],
            [0, 1, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ])
        .unwrap();
        LinearCode::from_pcm("hamming", h, RedundantRows::Reject).unwrap()
    }

    #[test]
    fn exact_codeword_is_returned() {
        let code = hamming();
        for x in code.codewords() {
            let r = ml_decode(&code, &modulate_bpsk(&x)).unwrap();
            assert_eq!(r.bits, x);
        }
    }

    #[test]
    fn single_sign_flip_is_corrected() {
        let code = hamming();
        for x in code.codewords() {
            for i in 0..7 {
                let mut y = modulate_bpsk(&x);
                y[i] = -y[i];
                assert_eq!(ml_decode(&code, &y).unwrap().bits, x);
            }
        }
    }

    #[test]
    fn ties_go_to_smallest_message() {
        // y = 0 is equidistant from every codeword.
        let code = hamming();
        let r = ml_decode(&code, &[0.0; 7]).unwrap();
        assert_eq!(r.bits, code.encode(&[0, 0, 0, 0]).unwrap());
    }

    #[test]
    fn refuses_long_messages() {
        let n = ML_MAX_K + 2;
        let mut rows = vec![vec![0u8; n]];
        rows[0][0] = 1;
        rows[0][1] = 1;
        let code = LinearCode::from_pcm("wide", BitMatrix::from_rows(&rows).unwrap(), RedundantRows::Reject).unwrap();
        assert!(matches!(
            MlDecoder::new(&code),
            Err(DecodeError::TooManyMessages { k, .. }) if k == n - 1
        ));
    }
}
