//! Training on the multiplicative-noise target: Adam, step-wise cosine decay,
//! and noisy words sampled around the all-zero codeword.
//!
//! Each optimizer step draws its batch from its own stream
//! (`seeded_rng(seed, step)`), so a run resumed from a checkpoint sees exactly
//! the batches an uninterrupted run would have seen.

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::channel::{
    ebno_to_sigma, gaussian_noise, modulate_bpsk, noise_target, seeded_rng, ChannelError, ChannelRng,
    ChannelSample, ReceivedWord,
};
use crate::codes::{HardWord, LinearCode};
use crate::model::{
    bce_loss, forward, Checkpoint, CheckpointError, ModelConfig, ModelError, ModelInput, ModelMasks,
    ModelParams, OptimizerState,
};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("loss became {loss} at step {step}")]
    Diverged { step: u64, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// How per-sample Eb/N0 values are drawn from the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrSampling {
    /// Uniform over the integers in [low, high].
    #[default]
    IntegerGrid,
    Continuous,
}

/// Which codewords are transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Codewords {
    #[default]
    Zero,
    /// Uniformly random codewords. The Gaussian draw z is applied as
    /// y = x_s ∘ (1 + z), which has the same law as x_s + z and gives every
    /// sample the magnitudes and syndrome of its all-zero counterpart.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub ebno_range_db: (f64, f64),
    pub snr_sampling: SnrSampling,
    pub codewords: Codewords,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batches_per_epoch: 1000,
            batch_size: 128,
            lr_start: 1e-4,
            lr_end: 5e-7,
            ebno_range_db: (3.0, 7.0),
            snr_sampling: SnrSampling::IntegerGrid,
            codewords: Codewords::Zero,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_steps(&self) -> u64 {
        (self.epochs * self.batches_per_epoch) as u64
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let (low, high) = self.ebno_range_db;
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(TrainError::Config(format!(
                "need lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(TrainError::Config(format!("empty Eb/N0 range [{low}, {high}]")));
        }
        if self.snr_sampling == SnrSampling::IntegerGrid && low.ceil() > high.floor() {
            return Err(TrainError::Config(format!("no integer Eb/N0 in [{low}, {high}]")));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(TrainError::Config("batch_size and batches_per_epoch must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate at `step`: cosine from lr_start (first step) to lr_end
    /// (last step).
    pub fn lr_at(&self, step: u64) -> f64 {
        let total = self.total_steps();
        if total <= 1 {
            return self.lr_start;
        }
        let t = step as f64 / (total - 1) as f64;
        self.lr_end + 0.5 * (self.lr_start - self.lr_end) * (1.0 + (std::f64::consts::PI * t).cos())
    }

    /// Learning rate at the first step of each epoch.
    pub fn lr_trace(&self) -> Vec<f64> {
        (0..self.epochs)
            .map(|e| self.lr_at((e * self.batches_per_epoch) as u64))
            .collect()
    }
}

/// Draws a training batch. With [`Codewords::Zero`] every target equals the
/// hard decision.
pub fn sample_batch(
    code: &LinearCode,
    batch_size: usize,
    ebno_range_db: (f64, f64),
    sampling: SnrSampling,
    codewords: Codewords,
    rng: &mut ChannelRng,
) -> Result<Vec<ChannelSample>, TrainError> {
    let (low, high) = ebno_range_db;
    let n = code.n();
    let mut draws = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let ebno = match sampling {
            SnrSampling::IntegerGrid => rng.random_range(low.ceil() as i64..=high.floor() as i64) as f64,
            SnrSampling::Continuous if low == high => low,
            SnrSampling::Continuous => rng.random_range(low..high),
        };
        let sigma = ebno_to_sigma(ebno, code.rate())?;
        draws.push((ebno, gaussian_noise(n, sigma, rng)));
    }
    // Messages come after all noise so both codeword modes share the noise.
    let mut out = Vec::with_capacity(batch_size);
    for (ebno, z) in draws {
        let x = match codewords {
            Codewords::Zero => HardWord::zeros(n),
            Codewords::Random => {
                let m: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                code.encode(&m).map_err(ChannelError::from)?
            }
        };
        let x_s = modulate_bpsk(&x);
        let y: Vec<f64> = x_s.iter().zip(&z).map(|(s, z)| s * (1.0 + z)).collect();
        let target = noise_target(&y, &x_s)?;
        out.push(ChannelSample {
            received: ReceivedWord::new(y, code.pcm())?,
            transmitted_bits: x,
            target,
            ebno_db: ebno,
        });
    }
    Ok(out)
}

/// Per-epoch history of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainRecord {
    /// Zero-based index of the first recorded epoch (non-zero after resume).
    pub first_epoch: usize,
    pub epoch_loss: Vec<f64>,
    /// Learning rate at the first step of each epoch.
    pub lr: Vec<f64>,
    pub step_loss: Vec<f64>,
    pub wall_time_s: f64,
}

impl TrainRecord {
    /// `epoch,mean_loss,lr` rows, epochs numbered from 1.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,lr\n");
        for (i, (l, r)) in self.epoch_loss.iter().zip(&self.lr).enumerate() {
            out.push_str(&format!("{},{l},{r}\n", self.first_epoch + i + 1));
        }
        out
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Stateful training loop over one code.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    code: &'a LinearCode,
    train: TrainConfig,
    model: ModelConfig,
    masks: ModelMasks,
    params: ModelParams<f32>,
    opt: OptimizerState,
}

impl<'a> Trainer<'a> {
    pub fn new(
        code: &'a LinearCode,
        model: ModelConfig,
        train: TrainConfig,
        params: ModelParams<f32>,
    ) -> Result<Self, TrainError> {
        let zeros: Vec<Tensor<f32>> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape.clone()))
            .collect();
        let opt = OptimizerState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        };
        Self::with_state(code, model, train, params, opt)
    }

    /// Continues from a checkpoint; one saved without optimizer state starts
    /// with fresh moments at step 0.
    pub fn resume(code: &'a LinearCode, train: TrainConfig, ckpt: Checkpoint) -> Result<Self, TrainError> {
        match ckpt.optimizer {
            Some(opt) => Self::with_state(code, ckpt.config, train, ckpt.params, opt),
            None => Self::new(code, ckpt.config, train, ckpt.params),
        }
    }

    fn with_state(
        code: &'a LinearCode,
        model: ModelConfig,
        train: TrainConfig,
        params: ModelParams<f32>,
        opt: OptimizerState,
    ) -> Result<Self, TrainError> {
        train.validate()?;
        model.validate()?;
        if model.n != code.n() || model.checks != code.checks() {
            return Err(TrainError::Config(format!(
                "model expects n = {}, checks = {} but code {} has n = {}, checks = {}",
                model.n,
                model.checks,
                code.name(),
                code.n(),
                code.checks()
            )));
        }
        let masks = ModelMasks::build(code.pcm(), model.arch);
        Ok(Trainer {
            code,
            train,
            model,
            masks,
            params,
            opt,
        })
    }

    pub fn steps_done(&self) -> u64 {
        self.opt.step
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    /// Current state. Before the first step there is no optimizer state to
    /// save, so the result equals a freshly initialized checkpoint.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.model.clone(),
            params: self.params.clone(),
            optimizer: (self.opt.step > 0).then(|| self.opt.clone()),
        }
    }

    /// Loss of a batch under the current parameters, without updating.
    pub fn batch_loss(&self, samples: &[ChannelSample]) -> Result<f64, TrainError> {
        let mut tape = Tape::<f32>::new();
        let vars = self.params.register(&mut tape, false);
        let (loss, _) = self.loss_on(&mut tape, &vars, samples)?;
        Ok(loss)
    }

    fn loss_on(
        &self,
        tape: &mut Tape<f32>,
        vars: &crate::model::ParamVars,
        samples: &[ChannelSample],
    ) -> Result<(f64, crate::tensor::Var), TrainError> {
        let input = ModelInput::from_received(samples.iter().map(|s| &s.received));
        let trace = forward(tape, vars, &self.model, &self.masks, &input)?;
        let targets: Vec<u8> = samples.iter().flat_map(|s| s.target.iter().copied()).collect();
        let loss = bce_loss(tape, trace.logits, &targets, samples.len()).map_err(ModelError::from)?;
        Ok((f64::from(tape.value(loss)[0]), loss))
    }

    pub fn next_batch(&self) -> Result<Vec<ChannelSample>, TrainError> {
        let mut rng = seeded_rng(self.train.seed, self.opt.step);
        sample_batch(
            self.code,
            self.train.batch_size,
            self.train.ebno_range_db,
            self.train.snr_sampling,
            self.train.codewords,
            &mut rng,
        )
    }

    /// One Adam step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64, TrainError> {
        let samples = self.next_batch()?;
        let mut tape = Tape::<f32>::new();
        let vars = self.params.register(&mut tape, true);
        let (loss, loss_var) = self.loss_on(&mut tape, &vars, &samples)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged {
                step: self.opt.step,
                loss,
            });
        }
        tape.backward(loss_var).map_err(ModelError::from)?;
        let lr = self.train.lr_at(self.opt.step);
        self.opt.step += 1;
        let t = self.opt.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = (1.0 - BETA2.powi(t)).sqrt();
        let step_size = (lr / c1) as f32;
        let (b1, b2, eps, c2) = (BETA1 as f32, BETA2 as f32, ADAM_EPS as f32, c2 as f32);
        let ordered = vars.ordered();
        for (((p, m), v), var) in self
            .params
            .tensors_mut()
            .into_iter()
            .zip(&mut self.opt.m)
            .zip(&mut self.opt.v)
            .zip(ordered)
        {
            let g = tape.grad(var);
            for i in 0..g.len() {
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * g[i];
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * g[i] * g[i];
                p.data[i] -= step_size * m.data[i] / (v.data[i].sqrt() / c2 + eps);
            }
        }
        Ok(loss)
    }

    /// Runs one epoch of steps and returns its mean loss.
    pub fn run_epoch(&mut self, record: &mut TrainRecord) -> Result<f64, TrainError> {
        let epoch = self.opt.step as usize / self.train.batches_per_epoch;
        record.lr.push(self.train.lr_trace()[epoch]);
        let mut sum = 0.0;
        for _ in 0..self.train.batches_per_epoch {
            let l = self.step()?;
            record.step_loss.push(l);
            sum += l;
        }
        let mean = sum / self.train.batches_per_epoch as f64;
        record.epoch_loss.push(mean);
        Ok(mean)
    }

    /// Epochs left until the configured total.
    pub fn remaining_epochs(&self) -> usize {
        self.train.epochs - (self.opt.step as usize / self.train.batches_per_epoch).min(self.train.epochs)
    }

    /// Runs the remaining epochs, calling `on_epoch(epoch_index, mean_loss,
    /// trainer)` after each one.
    pub fn run(
        &mut self,
        on_epoch: impl FnMut(usize, f64, &Trainer) -> Result<(), TrainError>,
    ) -> Result<TrainRecord, TrainError> {
        self.run_epochs(usize::MAX, on_epoch)
    }

    /// Like [`Trainer::run`] but stops after at most `max_epochs`; the
    /// schedule still spans the configured total.
    pub fn run_epochs(
        &mut self,
        max_epochs: usize,
        mut on_epoch: impl FnMut(usize, f64, &Trainer) -> Result<(), TrainError>,
    ) -> Result<TrainRecord, TrainError> {
        let start = Instant::now();
        let mut record = TrainRecord {
            first_epoch: self.opt.step as usize / self.train.batches_per_epoch,
            ..TrainRecord::default()
        };
        while self.remaining_epochs() > 0 && record.epoch_loss.len() < max_epochs {
            let mean = self.run_epoch(&mut record)?;
            let epoch = self.opt.step as usize / self.train.batches_per_epoch - 1;
            on_epoch(epoch, mean, self)?;
        }
        record.wall_time_s = start.elapsed().as_secs_f64();
        Ok(record)
    }
}

/// Trains from `params` for the full configured schedule.
pub fn run_training(
    code: &LinearCode,
    model: ModelConfig,
    train: TrainConfig,
    params: ModelParams<f32>,
) -> Result<(TrainRecord, Checkpoint), TrainError> {
    let mut trainer = Trainer::new(code, model, train, params)?;
    let record = trainer.run(|_, _, _| Ok(()))?;
    Ok((record, trainer.checkpoint()))
}
