//! BPSK modulation over AWGN and Rayleigh fading channels.
//!
//! Bit 0 maps to +1 and bit 1 to -1, so `hard_decision(modulate_bpsk(x)) == x`.
//! All randomness flows through a caller-owned [`ChannelRng`]; outputs are pure
//! functions of the inputs and the stream state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::codes::{hard_decision, syndrome, BitMatrix, CodeError, HardWord};

/// Seedable random stream used by every stochastic operation.
pub type ChannelRng = ChaCha8Rng;

/// Independent stream `stream` under `seed`; used to give each worker its own
/// reproducible sequence.
pub fn seeded_rng(seed: u64, stream: u64) -> ChannelRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("code rate {0} outside (0, 1]")]
    InvalidRate(f64),
    #[error("noise standard deviation must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelKind {
    #[default]
    Awgn,
    /// y = h·x + z with h ~ Rayleigh(1), unknown to the receiver.
    Rayleigh,
}

/// Channel output together with the decoder-side features derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedWord {
    pub y: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub hard: HardWord,
    pub synd: Vec<u8>,
}

impl ReceivedWord {
    pub fn new(y: Vec<f64>, h: &BitMatrix) -> Result<Self, ChannelError> {
        let hard = hard_decision(&y)?;
        let synd = syndrome(&hard, h)?;
        let magnitude = y.iter().map(|v| v.abs()).collect();
        Ok(ReceivedWord {
            y,
            magnitude,
            hard,
            synd,
        })
    }

    pub fn syndrome_is_zero(&self) -> bool {
        self.synd.iter().all(|&b| b == 0)
    }
}

/// One labelled training / evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub received: ReceivedWord,
    pub transmitted_bits: HardWord,
    /// Binarized multiplicative noise, the training target.
    pub target: Vec<u8>,
    pub ebno_db: f64,
}

pub fn modulate_bpsk(x: &[u8]) -> Vec<f64> {
    x.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// σ = (2 · R · 10^(Eb/N0 / 10))^(-1/2).
pub fn ebno_to_sigma(ebno_db: f64, rate: f64) -> Result<f64, ChannelError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(ChannelError::InvalidRate(rate));
    }
    Ok((2.0 * rate * 10f64.powf(ebno_db / 10.0)).powf(-0.5))
}

fn check_sigma(sigma: f64) -> Result<(), ChannelError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::InvalidSigma(sigma))
    }
}

pub fn gaussian_noise(len: usize, sigma: f64, rng: &mut ChannelRng) -> Vec<f64> {
    (0..len)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Rayleigh(scale 1) draws by inversion: sqrt(-2 ln(1 - U)).
pub fn rayleigh_gains(len: usize, rng: &mut ChannelRng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            (-2.0 * (1.0 - u).ln()).sqrt()
        })
        .collect()
}

pub fn transmit_awgn(
    x_s: &[f64],
    sigma: f64,
    h: &BitMatrix,
    rng: &mut ChannelRng,
) -> Result<ReceivedWord, ChannelError> {
    check_sigma(sigma)?;
    let z = gaussian_noise(x_s.len(), sigma, rng);
    ReceivedWord::new(x_s.iter().zip(z).map(|(x, z)| x + z).collect(), h)
}

pub fn transmit_rayleigh(
    x_s: &[f64],
    sigma: f64,
    h: &BitMatrix,
    rng: &mut ChannelRng,
) -> Result<ReceivedWord, ChannelError> {
    check_sigma(sigma)?;
    let gains = rayleigh_gains(x_s.len(), rng);
    let z = gaussian_noise(x_s.len(), sigma, rng);
    let y = x_s
        .iter()
        .zip(gains)
        .zip(z)
        .map(|((x, g), z)| g * x + z)
        .collect();
    ReceivedWord::new(y, h)
}

pub fn transmit(
    kind: ChannelKind,
    x_s: &[f64],
    sigma: f64,
    h: &BitMatrix,
    rng: &mut ChannelRng,
) -> Result<ReceivedWord, ChannelError> {
    match kind {
        ChannelKind::Awgn => transmit_awgn(x_s, sigma, h, rng),
        ChannelKind::Rayleigh => transmit_rayleigh(x_s, sigma, h, rng),
    }
}

/// z̃_i = bin(sign(y_i · x_s,i)).
pub fn noise_target(y: &[f64], x_s: &[f64]) -> Result<Vec<u8>, ChannelError> {
    if y.len() != x_s.len() {
        return Err(ChannelError::LengthMismatch {
            expected: x_s.len(),
            got: y.len(),
        });
    }
    Ok(y
        .iter()
        .zip(x_s)
        .map(|(a, b)| u8::from(a * b < 0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tree_h() -> BitMatrix {
        BitMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1]]).unwrap()
    }

    #[test]
    fn bpsk_mapping() {
        assert_eq!(modulate_bpsk(&[1, 0, 1]), vec![-1.0, 1.0, -1.0]);
        assert_eq!(modulate_bpsk(&[0; 4]), vec![1.0; 4]);
    }

    #[test]
    fn sigma_formula() {
        assert!((ebno_to_sigma(0.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        // 1 / sqrt(2 · 0.5 · 10^0.3) = 10^-0.15
        let expected = 10f64.powf(-0.15);
        assert!((ebno_to_sigma(3.0, 0.5).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7080).abs() < 1e-4);
        assert!(ebno_to_sigma(4.0, 0.5).unwrap() < ebno_to_sigma(3.0, 0.5).unwrap());
        assert_eq!(ebno_to_sigma(1.0, 0.0), Err(ChannelError::InvalidRate(0.0)));
        assert!(ebno_to_sigma(1.0, 1.5).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let xs = modulate_bpsk(&[0, 1, 1]);
        let a = transmit_awgn(&xs, 0.8, &tree_h(), &mut seeded_rng(9, 0)).unwrap();
        let b = transmit_awgn(&xs, 0.8, &tree_h(), &mut seeded_rng(9, 0)).unwrap();
        assert_eq!(a, b);
        let c = transmit_awgn(&xs, 0.8, &tree_h(), &mut seeded_rng(9, 1)).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn tiny_sigma_preserves_bits() {
        let x = [1u8, 0, 1];
        let mut rng = seeded_rng(1, 0);
        for _ in 0..100 {
            let r = transmit_awgn(&modulate_bpsk(&x), 1e-9, &tree_h(), &mut rng).unwrap();
            assert_eq!(r.hard.bits(), &x);
            let r = transmit_rayleigh(&modulate_bpsk(&x), 1e-9, &tree_h(), &mut rng).unwrap();
            assert_eq!(r.hard.bits(), &x);
        }
        assert!(transmit_awgn(&[1.0], 0.0, &tree_h(), &mut rng).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = seeded_rng(2024, 0);
        let z = gaussian_noise(1_000_000, 1.0, &mut rng);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn rayleigh_mean() {
        let mut rng = seeded_rng(7, 0);
        let h = rayleigh_gains(1_000_000, &mut rng);
        assert!(h.iter().all(|&v| v >= 0.0));
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean / expected - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn noise_target_cases() {
        let xs = modulate_bpsk(&[0, 1, 1, 0]);
        assert_eq!(noise_target(&xs, &xs).unwrap(), vec![0; 4]);
        let mut y = xs.clone();
        y[2] = 0.4; // sign flipped relative to x_s = -1
        assert_eq!(noise_target(&y, &xs).unwrap(), vec![0, 0, 1, 0]);
        assert!(noise_target(&y[..3], &xs).is_err());
    }

    proptest! {
        #[test]
        fn magnitude_sign_decomposition(y in prop::collection::vec(-5.0f64..5.0, 3)) {
            let r = ReceivedWord::new(y.clone(), &tree_h()).unwrap();
            let signs = modulate_bpsk(&r.hard);
            for i in 0..3 {
                prop_assert_eq!(r.magnitude[i] * signs[i], y[i]);
            }
        }

        // Exact zeros are excluded: there the product form sees -0.0 and the
        // XOR form sees sign(0) = +1, so the two disagree on a null set.
        #[test]
        fn target_equals_hard_xor_bits(
            mags in prop::collection::vec(1e-6f64..5.0, 8),
            noise_signs in prop::collection::vec(any::<bool>(), 8),
            bits in prop::collection::vec(0u8..2, 8),
        ) {
            let xs = modulate_bpsk(&bits);
            let y: Vec<f64> = (0..8)
                .map(|i| xs[i] * mags[i] * if noise_signs[i] { -1.0 } else { 1.0 })
                .collect();
            let target = noise_target(&y, &xs).unwrap();
            let hard = hard_decision(&y).unwrap();
            let expected: Vec<u8> = hard.iter().zip(&bits).map(|(a, b)| a ^ b).collect();
            prop_assert_eq!(&target, &expected);
            // Codeword independence: the same multiplicative noise on a
            // different word yields the same target.
            let other = modulate_bpsk(&vec![1u8; 8]);
            let t: Vec<f64> = (0..8).map(|i| y[i] * xs[i]).collect();
            let y2: Vec<f64> = (0..8).map(|i| other[i] * t[i]).collect();
            prop_assert_eq!(noise_target(&y2, &other).unwrap(), target);
        }
    }
}
