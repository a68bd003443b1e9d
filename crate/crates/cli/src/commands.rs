use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use crossmpt::channel::{modulate_bpsk, seeded_rng, transmit_awgn, ebno_to_sigma, ChannelKind, ReceivedWord};
use crossmpt::classical::{BpDecoder, BpVariant, MlDecoder};
use crossmpt::eval::{
    estimate_ber, flops_for_code, plot_data, BerConfig, BpFrameDecoder, FlopsReport, FrameDecoder,
    HardFrameDecoder, MlFrameDecoder,
};
use crossmpt::masks::mask_stats as compute_mask_stats;
use crossmpt::model::{
    Aggregate, Arch, Checkpoint, ModelConfig, ModelParams, NeuralDecoder, Reduce, SyndromeEmbedding,
    INIT_STREAM,
};
use crossmpt::train::{Codewords, SnrSampling, TrainConfig, Trainer};
use crossmpt::{HardWord, LinearCode, RedundantRows};

use crate::io::{emit, load_code, write_atomic};
use crate::CliError;

#[derive(Clone, Copy, ValueEnum)]
pub enum RowsPolicy {
    /// Fail on rank-deficient matrices.
    Reject,
    /// Remove dependent rows before use.
    Drop,
    /// Keep every row as loaded.
    Keep,
}

impl From<RowsPolicy> for RedundantRows {
    fn from(p: RowsPolicy) -> Self {
        match p {
            RowsPolicy::Reject => RedundantRows::Reject,
            RowsPolicy::Drop => RedundantRows::Drop,
            RowsPolicy::Keep => RedundantRows::Keep,
        }
    }
}

#[derive(Args)]
pub struct PcmArgs {
    /// Parity-check matrix (.alist, or plain 0/1 rows). Relative paths are
    /// also looked up under $CROSSMPT_PCM_DIR.
    #[arg(long)]
    pub pcm: PathBuf,
    /// Handling of linearly dependent PCM rows.
    #[arg(long, value_enum, default_value = "keep")]
    pub redundant_rows: RowsPolicy,
}

impl PcmArgs {
    fn load(&self) -> Result<LinearCode, CliError> {
        load_code(&self.pcm, self.redundant_rows.into())
    }
}

#[derive(Args)]
pub struct CodeInfoArgs {
    #[command(flatten)]
    pcm: PcmArgs,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn profile(degrees: &[usize]) -> String {
    let mut counts = std::collections::BTreeMap::new();
    for &d in degrees {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    counts
        .iter()
        .map(|(d, c)| format!("{d}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn code_info(a: CodeInfoArgs) -> Result<(), CliError> {
    let code = a.pcm.load()?;
    let h = code.pcm();
    let text = format!(
        "name,{}\nn,{}\nk,{}\nrows,{}\nrank,{}\nrate,{}\nones,{}\nrow_degrees,{}\ncol_degrees,{}\n",
        code.name(),
        code.n(),
        code.k(),
        h.rows(),
        h.rank(),
        code.rate(),
        h.count_ones(),
        profile(&h.row_degrees()),
        profile(&h.col_degrees())
    );
    emit(a.out.as_deref(), &text)
}

#[derive(Args)]
pub struct MaskStatsArgs {
    /// One or more parity-check matrices.
    #[arg(long, required = true, num_args = 1..)]
    pcm: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "keep")]
    redundant_rows: RowsPolicy,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn mask_stats(a: MaskStatsArgs) -> Result<(), CliError> {
    let mut text = String::from("name,n,k,rho1,rho2,mm_unmasked,ms_unmasked,ss_unmasked\n");
    for p in &a.pcm {
        let code = load_code(p, a.redundant_rows.into())?;
        let s = compute_mask_stats(code.pcm());
        text.push_str(&format!(
            "{},{},{},{:.2},{:.2},{},{},{}\n",
            code.name(),
            code.n(),
            code.k(),
            s.rho1.percent_2dp(),
            s.rho2.percent_2dp(),
            s.mm_unmasked,
            s.ms_unmasked,
            s.ss_unmasked
        ));
    }
    emit(a.out.as_deref(), &text)
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ArchArg {
    Crossmpt,
    Ecct,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SyndromeArg {
    /// 0 -> +1, 1 -> -1.
    PlusMinus,
    /// Raw bit value.
    ZeroOne,
}

#[derive(Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "crossmpt")]
    arch: ArchArg,
    /// Number of decoder layers N.
    #[arg(long, default_value_t = 6)]
    layers: usize,
    /// Embedding width d.
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, default_value_t = 4)]
    ffnn_multiplier: usize,
    #[arg(long, value_enum, default_value = "plus-minus")]
    syndrome_embedding: SyndromeArg,
}

impl ModelArgs {
    fn config(&self, code: &LinearCode) -> Result<ModelConfig, CliError> {
        let arch = match self.arch {
            ArchArg::Crossmpt => Arch::CrossMpt,
            ArchArg::Ecct => Arch::Ecct,
        };
        let mut cfg = ModelConfig::for_code(code, self.layers, self.dim, arch).with_heads(self.heads);
        cfg.ffnn_multiplier = self.ffnn_multiplier;
        cfg.syndrome_embedding = match self.syndrome_embedding {
            SyndromeArg::PlusMinus => SyndromeEmbedding::PlusMinus,
            SyndromeArg::ZeroOne => SyndromeEmbedding::ZeroOne,
        };
        cfg.validate().map_err(CliError::user)?;
        Ok(cfg)
    }
}

fn init_checkpoint(cfg: ModelConfig, seed: u64) -> Result<Checkpoint, CliError> {
    let params = ModelParams::init(&cfg, &mut seeded_rng(seed, INIT_STREAM)).map_err(CliError::user)?;
    Ok(Checkpoint {
        config: cfg,
        params,
        optimizer: None,
    })
}

fn load_checkpoint(path: &Path, code: &LinearCode) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    let ckpt = Checkpoint::from_bytes(&bytes).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    if ckpt.config.n != code.n() || ckpt.config.checks != code.checks() {
        return Err(CliError::User(format!(
            "checkpoint/config mismatch: {} was trained for n = {}, checks = {} but {} has n = {}, checks = {}",
            path.display(),
            ckpt.config.n,
            ckpt.config.checks,
            code.name(),
            code.n(),
            code.checks()
        )));
    }
    Ok(ckpt)
}

#[derive(Args)]
pub struct InitArgs {
    #[command(flatten)]
    pcm: PcmArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn init(a: InitArgs) -> Result<(), CliError> {
    let code = a.pcm.load()?;
    let ckpt = init_checkpoint(a.model.config(&code)?, a.seed)?;
    write_atomic(&a.out, &ckpt.to_bytes())
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pcm: PcmArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1000)]
    batches_per_epoch: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr_start: f64,
    #[arg(long, default_value_t = 5e-7)]
    lr_end: f64,
    /// Lowest training Eb/N0 in dB.
    #[arg(long, default_value_t = 3.0)]
    snr_low: f64,
    /// Highest training Eb/N0 in dB.
    #[arg(long, default_value_t = 7.0)]
    snr_high: f64,
    /// Draw Eb/N0 uniformly from the interval instead of its integers.
    #[arg(long)]
    continuous_snr: bool,
    /// Train on random codewords instead of the all-zero word.
    #[arg(long)]
    random_codewords: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Continue from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also write the checkpoint after every this many epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Stop after this many epochs in this invocation; the learning-rate
    /// schedule still spans --epochs, so a later --resume continues it.
    #[arg(long)]
    stop_after: Option<usize>,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Loss log (epoch,mean_loss,lr).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let code = a.pcm.load()?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batches_per_epoch: a.batches_per_epoch,
        batch_size: a.batch_size,
        lr_start: a.lr_start,
        lr_end: a.lr_end,
        ebno_range_db: (a.snr_low, a.snr_high),
        snr_sampling: if a.continuous_snr {
            SnrSampling::Continuous
        } else {
            SnrSampling::IntegerGrid
        },
        codewords: if a.random_codewords {
            Codewords::Random
        } else {
            Codewords::Zero
        },
        seed: a.seed,
    };
    tc.validate().map_err(CliError::user)?;
    let mut trainer = match &a.resume {
        Some(path) => Trainer::resume(&code, tc, load_checkpoint(path, &code)?),
        None => {
            let ckpt = init_checkpoint(a.model.config(&code)?, a.seed)?;
            Trainer::new(&code, ckpt.config, tc, ckpt.params)
        }
    }
    .map_err(CliError::user)?;
    let every = a.checkpoint_every.unwrap_or(0);
    let out = a.out.clone();
    let record = trainer
        .run_epochs(a.stop_after.unwrap_or(usize::MAX), |epoch, loss, t| {
            eprintln!("epoch {} mean loss {loss:.6}", epoch + 1);
            if every > 0 && (epoch + 1) % every == 0 {
                write_atomic(&out, &t.checkpoint().to_bytes())
                    .map_err(|e| crossmpt::train::TrainError::Config(e.to_string()))?;
            }
            Ok(())
        })
        .map_err(|e| match e {
            crossmpt::train::TrainError::Diverged { .. } => CliError::internal(e),
            other => CliError::user(other),
        })?;
    write_atomic(&a.out, &trainer.checkpoint().to_bytes())?;
    if let Some(p) = &a.loss_csv {
        write_atomic(p, record.loss_csv().as_bytes())?;
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DecoderArg {
    /// Trained transformer (needs --checkpoint).
    Nn,
    /// Sum-product belief propagation.
    Bp,
    /// Min-sum belief propagation.
    Ms,
    /// Exhaustive maximum likelihood (k <= 24).
    Ml,
    /// Hard decision, no decoding.
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ChannelArg {
    Awgn,
    Rayleigh,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pcm: PcmArgs,
    #[arg(long, value_enum)]
    decoder: DecoderArg,
    /// Checkpoint for --decoder nn.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Eb/N0 points in dB (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    min_frame_errors: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// BP iteration cap.
    #[arg(long, default_value_t = 50)]
    bp_iters: usize,
    /// Scale factor for min-sum check messages.
    #[arg(long)]
    ms_scale: Option<f64>,
    #[arg(long, value_enum, default_value = "awgn")]
    channel: ChannelArg,
    /// BER CSV output (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `series,ebno_db,ber` plot data here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let code = a.pcm.load()?;
    let h = code.pcm().clone();
    let decoder: Box<dyn FrameDecoder> = match a.decoder {
        DecoderArg::Hard => Box::new(HardFrameDecoder(&h)),
        DecoderArg::Bp => Box::new(BpFrameDecoder(
            BpDecoder::new(&h, a.bp_iters, BpVariant::SumProduct).map_err(CliError::user)?,
        )),
        DecoderArg::Ms => {
            let variant = a.ms_scale.map_or(BpVariant::MinSum, BpVariant::ScaledMinSum);
            Box::new(BpFrameDecoder(BpDecoder::new(&h, a.bp_iters, variant).map_err(CliError::user)?))
        }
        DecoderArg::Ml => Box::new(MlFrameDecoder(MlDecoder::new(&code).map_err(CliError::user)?)),
        DecoderArg::Nn => {
            let path = a
                .checkpoint
                .as_ref()
                .ok_or_else(|| CliError::User("--decoder nn needs --checkpoint".into()))?;
            let ckpt = load_checkpoint(path, &code)?;
            Box::new(NeuralDecoder::new(ckpt.config, ckpt.params, h.clone()).map_err(CliError::user)?)
        }
    };
    let cfg = BerConfig {
        ebno_db: a.snr.clone(),
        min_frame_errors: a.min_frame_errors,
        max_frames: a.max_frames,
        seed: a.seed,
        workers: a.workers,
        channel: match a.channel {
            ChannelArg::Awgn => ChannelKind::Awgn,
            ChannelArg::Rayleigh => ChannelKind::Rayleigh,
        },
    };
    let report = estimate_ber(decoder.as_ref(), &code, &cfg).map_err(|e| match e {
        crossmpt::eval::EvalError::Config(_) => CliError::user(e),
        other => CliError::internal(other),
    })?;
    emit(a.out.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.plot_data {
        write_atomic(p, plot_data(std::slice::from_ref(&report)).as_bytes())?;
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    PerLayer,
    MeanOverLayers,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReduceArg {
    None,
    ColumnSum,
}

#[derive(Args)]
pub struct AttnDumpArgs {
    #[command(flatten)]
    pcm: PcmArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Zero-based bits whose signs are flipped in the probe word.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    flip: Vec<usize>,
    /// Add channel noise at this Eb/N0 instead of using the clean ±1 probe.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Codeword to probe, as a message index (bit i of the index is message bit i).
    #[arg(long, default_value_t = 0)]
    message: u64,
    #[arg(long, value_enum, default_value = "per-layer")]
    aggregate: AggregateArg,
    #[arg(long, value_enum, default_value = "none")]
    reduce: ReduceArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn attn_dump(a: AttnDumpArgs) -> Result<(), CliError> {
    let code = a.pcm.load()?;
    let ckpt = load_checkpoint(&a.checkpoint, &code)?;
    let dec = NeuralDecoder::new(ckpt.config, ckpt.params, code.pcm().clone()).map_err(CliError::user)?;
    let m: Vec<u8> = (0..code.k()).map(|i| ((a.message >> i.min(63)) & 1) as u8).collect();
    let x: HardWord = code.encode(&m).map_err(CliError::user)?;
    let x_s = modulate_bpsk(x.bits());
    let mut word = match a.snr {
        Some(snr) => {
            let sigma = ebno_to_sigma(snr, code.rate()).map_err(CliError::user)?;
            transmit_awgn(&x_s, sigma, code.pcm(), &mut seeded_rng(a.seed, 0)).map_err(CliError::user)?
        }
        None => ReceivedWord::new(x_s, code.pcm()).map_err(CliError::user)?,
    };
    let mut y = word.y.clone();
    for &i in &a.flip {
        if i >= code.n() {
            return Err(CliError::User(format!("--flip {i} is outside 0..{}", code.n())));
        }
        y[i] = -y[i];
    }
    word = ReceivedWord::new(y, code.pcm()).map_err(CliError::user)?;
    let aggregate = match a.aggregate {
        AggregateArg::PerLayer => Aggregate::PerLayer,
        AggregateArg::MeanOverLayers => Aggregate::MeanOverLayers,
    };
    let reduce = match a.reduce {
        ReduceArg::None => Reduce::None,
        ReduceArg::ColumnSum => Reduce::ColumnSum,
    };
    let maps = dec.attention_scores(&word, aggregate, reduce).map_err(CliError::internal)?;
    let mut text = String::from("layer,map,row,col,score\n");
    for map in &maps {
        let layer = map.layer.map_or_else(|| "mean".to_string(), |l| l.to_string());
        let summed = map.values.len() != map.rows * map.cols;
        for (idx, v) in map.values.iter().enumerate() {
            let (row, col) = if summed {
                ("sum".to_string(), idx)
            } else {
                ((idx / map.cols).to_string(), idx % map.cols)
            };
            text.push_str(&format!("{layer},{},{row},{col},{v}\n", map.map));
        }
    }
    emit(a.out.as_deref(), &text)
}

#[derive(Args)]
pub struct FlopsArgs {
    /// One or more parity-check matrices.
    #[arg(long, required = true, num_args = 1..)]
    pcm: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "keep")]
    redundant_rows: RowsPolicy,
    #[arg(long, default_value_t = 6)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, default_value_t = 4)]
    ffnn_multiplier: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn flops(a: FlopsArgs) -> Result<(), CliError> {
    let mut text = format!("name,{}\n", FlopsReport::CSV_HEADER);
    for p in &a.pcm {
        let code = load_code(p, a.redundant_rows.into())?;
        let mut cfg = ModelConfig::for_code(&code, a.layers, a.dim, Arch::CrossMpt).with_heads(a.heads);
        cfg.ffnn_multiplier = a.ffnn_multiplier;
        cfg.validate().map_err(CliError::user)?;
        let report = flops_for_code(code.pcm(), code.k(), &cfg);
        for row in report.csv_rows().lines() {
            text.push_str(&format!("{},{row}\n", code.name()));
        }
    }
    emit(a.out.as_deref(), &text)
}
