use rand::Rng;

use super::EvalError;
use crate::channel::{ebno_to_sigma, modulate_bpsk, seeded_rng, transmit, ChannelKind, ReceivedWord};
use crate::classical::{decode_hard, BpDecoder, DecodeResult, MlDecoder};
use crate::codes::{BitMatrix, HardWord, LinearCode};
use crate::model::NeuralDecoder;
use crate::tensor::Real;

/// Frames simulated per random stream. Work is split into chunks of this
/// size and merged in chunk order, so results do not depend on how many
/// workers ran.
pub const CHUNK_FRAMES: usize = 64;

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub received: ReceivedWord,
    /// Ground truth; only oracle decoders used in tests look at it.
    pub transmitted: HardWord,
}

/// Anything that turns received frames into decisions.
pub trait FrameDecoder: Sync {
    fn id(&self) -> String;
    fn decode_frames(&self, frames: &[Frame], sigma: f64) -> Result<Vec<DecodeResult>, EvalError>;
}

pub struct HardFrameDecoder<'a>(pub &'a BitMatrix);

impl FrameDecoder for HardFrameDecoder<'_> {
    fn id(&self) -> String {
        "hard".into()
    }

    fn decode_frames(&self, frames: &[Frame], _sigma: f64) -> Result<Vec<DecodeResult>, EvalError> {
        frames
            .iter()
            .map(|f| decode_hard(self.0, &f.received.y).map_err(EvalError::from))
            .collect()
    }
}

pub struct BpFrameDecoder(pub BpDecoder);

impl FrameDecoder for BpFrameDecoder {
    fn id(&self) -> String {
        match self.0.variant {
            crate::classical::BpVariant::SumProduct => format!("bp{}", self.0.max_iter),
            _ => format!("ms{}", self.0.max_iter),
        }
    }

    fn decode_frames(&self, frames: &[Frame], sigma: f64) -> Result<Vec<DecodeResult>, EvalError> {
        frames
            .iter()
            .map(|f| self.0.decode(&f.received.y, sigma).map_err(EvalError::from))
            .collect()
    }
}

pub struct MlFrameDecoder(pub MlDecoder);

impl FrameDecoder for MlFrameDecoder {
    fn id(&self) -> String {
        "ml".into()
    }

    fn decode_frames(&self, frames: &[Frame], _sigma: f64) -> Result<Vec<DecodeResult>, EvalError> {
        frames
            .iter()
            .map(|f| self.0.decode(&f.received.y).map_err(EvalError::from))
            .collect()
    }
}

impl<T: Real> FrameDecoder for NeuralDecoder<T> {
    fn id(&self) -> String {
        format!("nn-{}", self.config.arch.as_str())
    }

    fn decode_frames(&self, frames: &[Frame], _sigma: f64) -> Result<Vec<DecodeResult>, EvalError> {
        let words: Vec<ReceivedWord> = frames.iter().map(|f| f.received.clone()).collect();
        Ok(self.decode_batch(&words)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerConfig {
    pub ebno_db: Vec<f64>,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    pub workers: usize,
    pub channel: ChannelKind,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            ebno_db: vec![4.0, 5.0, 6.0],
            min_frame_errors: 500,
            max_frames: 10_000_000,
            seed: 0,
            workers: 1,
            channel: ChannelKind::Awgn,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebno_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub fer: f64,
    /// `None` when no bit error was seen: −ln BER is then only known to
    /// exceed ln(bits).
    pub neg_ln_ber: Option<f64>,
    /// Stopped by `max_frames` before reaching `min_frame_errors`.
    pub capped: bool,
}

impl BerPoint {
    /// Standard error of the BER estimate, treating bits as independent.
    pub fn ber_std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }

    fn neg_ln_field(&self) -> String {
        match self.neg_ln_ber {
            Some(v) => format!("{v}"),
            None => format!(">{}", (self.bits as f64).ln()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub code: String,
    pub decoder: String,
    pub seed: u64,
    pub channel: ChannelKind,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub points: Vec<BerPoint>,
}

pub const BER_CSV_HEADER: &str =
    "code,decoder,channel,seed,ebno_db,frames,frame_errors,bit_errors,bits,ber,fer,neg_ln_ber,capped";

impl BerReport {
    pub fn csv_rows(&self) -> String {
        let channel = match self.channel {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        };
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{channel},{},{},{},{},{},{},{},{},{},{}\n",
                self.code,
                self.decoder,
                self.seed,
                p.ebno_db,
                p.frames,
                p.frame_errors,
                p.bit_errors,
                p.bits,
                p.ber,
                p.fer,
                p.neg_ln_field(),
                p.capped
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{BER_CSV_HEADER}\n{}", self.csv_rows())
    }
}

/// `series,ebno_db,ber` rows, one series per report.
pub fn plot_data(reports: &[BerReport]) -> String {
    let mut out = String::from("series,ebno_db,ber\n");
    for r in reports {
        for p in &r.points {
            out.push_str(&format!("{}/{},{},{}\n", r.code, r.decoder, p.ebno_db, p.ber));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    frames: u64,
    frame_errors: u64,
    bit_errors: u64,
}

fn run_chunk(
    decoder: &dyn FrameDecoder,
    code: &LinearCode,
    cfg: &BerConfig,
    point: usize,
    sigma: f64,
    chunk: u64,
    frames: usize,
) -> Result<Tally, EvalError> {
    let mut rng = seeded_rng(cfg.seed, ((point as u64) << 40) | chunk);
    let mut batch = Vec::with_capacity(frames);
    for _ in 0..frames {
        let m: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let x = code.encode(&m)?;
        let received = transmit(cfg.channel, &modulate_bpsk(&x), sigma, code.pcm(), &mut rng)?;
        batch.push(Frame {
            received,
            transmitted: x,
        });
    }
    let results = decoder.decode_frames(&batch, sigma)?;
    if results.len() != frames {
        return Err(EvalError::DecoderOutput {
            expected: frames,
            got: results.len(),
        });
    }
    let mut t = Tally {
        frames: frames as u64,
        ..Tally::default()
    };
    for (f, r) in batch.iter().zip(&results) {
        let errs = f.transmitted.distance(&r.bits) as u64;
        t.bit_errors += errs;
        t.frame_errors += u64::from(errs > 0);
    }
    Ok(t)
}

/// Simulates random codewords at each Eb/N0 until `min_frame_errors` frame
/// errors or `max_frames` frames, whichever comes first.
pub fn estimate_ber(decoder: &dyn FrameDecoder, code: &LinearCode, cfg: &BerConfig) -> Result<BerReport, EvalError> {
    if cfg.min_frame_errors == 0 || cfg.max_frames == 0 || cfg.workers == 0 {
        return Err(EvalError::Config(
            "min_frame_errors, max_frames and workers must all be positive".into(),
        ));
    }
    let mut points = Vec::with_capacity(cfg.ebno_db.len());
    for (pi, &ebno) in cfg.ebno_db.iter().enumerate() {
        let sigma = ebno_to_sigma(ebno, code.rate())?;
        let mut total = Tally::default();
        let mut next_chunk = 0u64;
        let wave = cfg.workers * 4;
        'point: loop {
            let mut jobs = Vec::with_capacity(wave);
            for _ in 0..wave {
                let start = next_chunk * CHUNK_FRAMES as u64;
                if start >= cfg.max_frames {
                    break;
                }
                let frames = (cfg.max_frames - start).min(CHUNK_FRAMES as u64) as usize;
                jobs.push((next_chunk, frames));
                next_chunk += 1;
            }
            if jobs.is_empty() {
                break;
            }
            let tallies = run_wave(decoder, code, cfg, pi, sigma, &jobs)?;
            // Merge strictly in chunk order and stop at the first chunk that
            // satisfies the rule, discarding anything computed past it.
            for t in tallies {
                total.frames += t.frames;
                total.frame_errors += t.frame_errors;
                total.bit_errors += t.bit_errors;
                if total.frame_errors >= cfg.min_frame_errors || total.frames >= cfg.max_frames {
                    break 'point;
                }
            }
        }
        let bits = total.frames * code.n() as u64;
        let ber = total.bit_errors as f64 / bits as f64;
        points.push(BerPoint {
            ebno_db: ebno,
            frames: total.frames,
            frame_errors: total.frame_errors,
            bit_errors: total.bit_errors,
            bits,
            ber,
            fer: total.frame_errors as f64 / total.frames as f64,
            neg_ln_ber: (total.bit_errors > 0).then(|| -ber.ln()),
            capped: total.frame_errors < cfg.min_frame_errors,
        });
    }
    Ok(BerReport {
        code: code.name().to_string(),
        decoder: decoder.id(),
        seed: cfg.seed,
        channel: cfg.channel,
        min_frame_errors: cfg.min_frame_errors,
        max_frames: cfg.max_frames,
        points,
    })
}

fn run_wave(
    decoder: &dyn FrameDecoder,
    code: &LinearCode,
    cfg: &BerConfig,
    point: usize,
    sigma: f64,
    jobs: &[(u64, usize)],
) -> Result<Vec<Tally>, EvalError> {
    if cfg.workers == 1 {
        return jobs
            .iter()
            .map(|&(c, f)| run_chunk(decoder, code, cfg, point, sigma, c, f))
            .collect();
    }
    let mut slots: Vec<Option<Result<Tally, EvalError>>> = vec![None; jobs.len()];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|w| {
                s.spawn(move || {
                    jobs.iter()
                        .enumerate()
                        .skip(w)
                        .step_by(cfg.workers)
                        .map(|(i, &(c, f))| (i, run_chunk(decoder, code, cfg, point, sigma, c, f)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("BER worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every chunk ran")).collect()
}
