//! Browser front end for the decoder workbench.
//!
//! Every operation is a plain Rust function taking a PCM (alist or 0/1 rows)
//! and returning a serializable view; the `#[wasm_bindgen]` exports at the
//! bottom only convert those views to JSON strings.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

use crossmpt::channel::{ebno_to_sigma, modulate_bpsk, seeded_rng, transmit, ChannelError, ChannelKind};
use crossmpt::classical::{decode_hard, BpDecoder, BpVariant, DecodeError, DecodeResult, MlDecoder};
use crossmpt::codes::{parse_alist, parse_plain, CodeError};
use crossmpt::eval::{estimate_ber, BerConfig, BpFrameDecoder, EvalError, FrameDecoder, HardFrameDecoder, MlFrameDecoder};
use crossmpt::masks::{build_crossmpt_masks, build_ecct_mask, mask_stats, AttentionMask};
use crossmpt::{LinearCode, RedundantRows};

/// Frame budget per SNR point; keeps a curve under a few seconds in the page.
pub const MAX_DEMO_FRAMES: u64 = 200_000;

#[derive(Debug, Error)]
pub enum WebError {
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown decoder {0:?} (expected hard, bp, ms or ml)")]
    UnknownDecoder(String),
    #[error("message has {got} bits, code has k = {k}")]
    MessageLength { got: usize, k: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// PCMs bundled with the page.
pub const PRESETS: [(&str, &str); 6] = [
    ("hamming_7_4", include_str!("../../../codes/hamming_7_4.alist")),
    ("bch_31_16", include_str!("../../../codes/bch_31_16.alist")),
    ("bch_63_45", include_str!("../../../codes/bch_63_45.alist")),
    ("ldpc_121_70", include_str!("../../../codes/ldpc_121_70.alist")),
    ("turbo_132_40", include_str!("../../../codes/turbo_132_40.alist")),
    ("wran_384_320", include_str!("../../../codes/wran_384_320.alist")),
];

pub fn preset(name: &str) -> Result<&'static str, WebError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| WebError::UnknownPreset(name.to_string()))
}

/// Accepts alist text, falling back to whitespace-separated 0/1 rows.
pub fn parse_code(name: &str, text: &str) -> Result<LinearCode, WebError> {
    let h = parse_alist(text).or_else(|alist_err| parse_plain(text).map_err(|_| alist_err))?;
    Ok(LinearCode::from_pcm(name, h, RedundantRows::Keep)?)
}

#[derive(Debug, Serialize)]
pub struct MaskGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, 1 where attention is allowed.
    pub open: Vec<u8>,
}

impl From<&AttentionMask> for MaskGrid {
    fn from(m: &AttentionMask) -> Self {
        MaskGrid {
            rows: m.rows(),
            cols: m.cols(),
            open: m.open_flags().iter().map(|&b| u8::from(b)).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MaskView {
    pub n: usize,
    pub k: usize,
    pub checks: usize,
    /// Percentages, two decimals.
    pub rho_self: f64,
    pub rho_cross: f64,
    /// Bits querying checks.
    pub cross: MaskGrid,
    pub ecct: MaskGrid,
}

pub fn mask_view(code: &LinearCode) -> MaskView {
    let h = code.pcm();
    let stats = mask_stats(h);
    MaskView {
        n: code.n(),
        k: code.k(),
        checks: h.rows(),
        rho_self: stats.rho1.percent_2dp(),
        rho_cross: stats.rho2.percent_2dp(),
        cross: MaskGrid::from(&build_crossmpt_masks(h).m2s),
        ecct: MaskGrid::from(&build_ecct_mask(h, false)),
    }
}

fn decoder_for<'a>(code: &'a LinearCode, name: &str, iters: usize) -> Result<Box<dyn FrameDecoder + 'a>, WebError> {
    let h = code.pcm();
    Ok(match name {
        "hard" => Box::new(HardFrameDecoder(h)),
        "bp" => Box::new(BpFrameDecoder(BpDecoder::new(h, iters, BpVariant::SumProduct)?)),
        "ms" => Box::new(BpFrameDecoder(BpDecoder::new(h, iters, BpVariant::MinSum)?)),
        "ml" => Box::new(MlFrameDecoder(MlDecoder::new(code)?)),
        other => return Err(WebError::UnknownDecoder(other.to_string())),
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub ebno_db: f64,
    pub ber: f64,
    pub fer: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub capped: bool,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub decoder: String,
    pub points: Vec<CurvePoint>,
}

pub fn ber_curve(
    code: &LinearCode,
    decoder: &str,
    ebno_db: &[f64],
    min_frame_errors: u64,
    seed: u64,
) -> Result<Curve, WebError> {
    let dec = decoder_for(code, decoder, 20)?;
    let cfg = BerConfig {
        ebno_db: ebno_db.to_vec(),
        min_frame_errors,
        max_frames: MAX_DEMO_FRAMES,
        seed,
        workers: 1,
        channel: ChannelKind::Awgn,
    };
    let report = estimate_ber(dec.as_ref(), code, &cfg)?;
    Ok(Curve {
        decoder: report.decoder,
        points: report
            .points
            .iter()
            .map(|p| CurvePoint {
                ebno_db: p.ebno_db,
                ber: p.ber,
                fer: p.fer,
                frames: p.frames,
                bit_errors: p.bit_errors,
                capped: p.capped,
            })
            .collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct DecodeView {
    pub codeword: Vec<u8>,
    pub received: Vec<f64>,
    pub hard: Vec<u8>,
    pub syndrome_weight: usize,
    pub decoded: Vec<u8>,
    pub errors_before: usize,
    pub errors_after: usize,
    pub converged: bool,
    pub iterations: usize,
}

fn finish(codeword: &[u8], received: Vec<f64>, hard: Vec<u8>, syndrome_weight: usize, r: DecodeResult) -> DecodeView {
    let count = |w: &[u8]| w.iter().zip(codeword).filter(|(a, b)| a != b).count();
    DecodeView {
        codeword: codeword.to_vec(),
        errors_before: count(&hard),
        errors_after: count(r.bits.bits()),
        received,
        hard,
        syndrome_weight,
        decoded: r.bits.into_bits(),
        converged: r.converged,
        iterations: r.iterations_used,
    }
}

/// Encodes `message` (or a seeded random one when empty), sends it over AWGN
/// and decodes it.
pub fn decode_word(
    code: &LinearCode,
    decoder: &str,
    message: &[u8],
    ebno_db: f64,
    seed: u64,
) -> Result<DecodeView, WebError> {
    let mut rng = seeded_rng(seed, 0);
    let message: Vec<u8> = if message.is_empty() {
        (0..code.k()).map(|_| rng.random_range(0..2u8)).collect()
    } else if message.len() == code.k() {
        message.to_vec()
    } else {
        return Err(WebError::MessageLength {
            got: message.len(),
            k: code.k(),
        });
    };
    let x = code.encode(&message)?;
    let sigma = ebno_to_sigma(ebno_db, code.rate())?;
    let word = transmit(ChannelKind::Awgn, &modulate_bpsk(x.bits()), sigma, code.pcm(), &mut rng)?;
    let result = match decoder {
        "hard" => decode_hard(code.pcm(), &word.y)?,
        "bp" => BpDecoder::new(code.pcm(), 20, BpVariant::SumProduct)?.decode(&word.y, sigma)?,
        "ms" => BpDecoder::new(code.pcm(), 20, BpVariant::MinSum)?.decode(&word.y, sigma)?,
        "ml" => MlDecoder::new(code)?.decode(&word.y)?,
        other => return Err(WebError::UnknownDecoder(other.to_string())),
    };
    let syndrome_weight = word.synd.iter().filter(|&&b| b == 1).count();
    Ok(finish(x.bits(), word.y, word.hard.into_bits(), syndrome_weight, result))
}

fn code_from(preset_name: &str, pcm_text: &str) -> Result<LinearCode, WebError> {
    if pcm_text.trim().is_empty() {
        parse_code(preset_name, preset(preset_name)?)
    } else {
        parse_code("custom", pcm_text)
    }
}

fn to_js<T: Serialize>(r: Result<T, WebError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Names of the bundled PCMs as a JSON array.
#[wasm_bindgen]
pub fn presets() -> String {
    serde_json::to_string(&PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>()).unwrap_or_default()
}

/// Mask grids and densities. An empty `pcm_text` selects the preset.
#[wasm_bindgen(js_name = maskView)]
pub fn mask_view_js(preset_name: &str, pcm_text: &str) -> Result<String, JsError> {
    to_js(code_from(preset_name, pcm_text).map(|c| mask_view(&c)))
}

#[wasm_bindgen(js_name = berCurve)]
pub fn ber_curve_js(
    preset_name: &str,
    pcm_text: &str,
    decoder: &str,
    ebno_db: Vec<f64>,
    min_frame_errors: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(code_from(preset_name, pcm_text).and_then(|c| {
        ber_curve(&c, decoder, &ebno_db, u64::from(min_frame_errors), u64::from(seed))
    }))
}

/// `message` may be empty for a random codeword.
#[wasm_bindgen(js_name = decodeWord)]
pub fn decode_word_js(
    preset_name: &str,
    pcm_text: &str,
    decoder: &str,
    message: Vec<u8>,
    ebno_db: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(code_from(preset_name, pcm_text).and_then(|c| decode_word(&c, decoder, &message, ebno_db, u64::from(seed))))
}
