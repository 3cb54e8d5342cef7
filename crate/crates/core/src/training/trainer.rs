use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{block_rng, Batch, BatchInputs, DataGenerator, SampleDomain, SnrPolicy};
use super::optim::{Adam, CosineSchedule};
use crate::autodiff::{BnMode, Tape, Tensor, TensorArchive};
use crate::cne::{cne_forward, cne_turbo_forward, infer_conv, infer_turbo, BnUpdates, CneConfig, CneParameters, CodeKind};
use crate::codec::{QppInterleaver, QppTable};
use crate::error::{Error, Result};
use crate::rate::CodeRate;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Mother code only, at a fixed SNR.
    Pretrain,
    /// Mixed rates at their balanced SNRs, starting from a pretrained model.
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub phase: Phase,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Pretraining SNR, or the balanced-SNR offset when fine-tuning.
    pub snr_offset_db: f64,
    pub code: CodeKind,
    pub k: usize,
    pub rates: Vec<CodeRate>,
    pub seed: u64,
    /// Zero-tail termination; defaults to on for conv and off for Turbo.
    pub terminate: Option<bool>,
    pub validation_blocks: usize,
    /// Rescales the gradient to this global L2 norm when it is larger.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            phase: Phase::Pretrain,
            epochs: 30,
            batches_per_epoch: 64,
            batch_size: 64,
            lr_initial: 1e-3,
            lr_final: 1e-6,
            snr_offset_db: 0.0,
            code: CodeKind::Conv,
            k: 64,
            rates: vec![CodeRate::new(1, 2).expect("1/2")],
            seed: 0,
            terminate: None,
            validation_blocks: 256,
            grad_clip: None,
        }
    }
}

pub fn mother_rate(code: CodeKind) -> CodeRate {
    match code {
        CodeKind::Conv => CodeRate::new(1, 2),
        CodeKind::Turbo => CodeRate::new(1, 3),
    }
    .expect("valid rate")
}

impl TrainConfig {
    pub fn terminate(&self) -> bool {
        self.terminate.unwrap_or(self.code == CodeKind::Conv)
    }

    pub fn total_steps(&self) -> usize {
        self.epochs * self.batches_per_epoch
    }

    pub fn schedule(&self) -> CosineSchedule {
        CosineSchedule::new(self.lr_initial, self.lr_final, self.total_steps())
    }

    pub fn snr_policy(&self) -> SnrPolicy {
        match self.phase {
            Phase::Pretrain => SnrPolicy::Fixed(self.snr_offset_db),
            Phase::Finetune => SnrPolicy::Balanced {
                offset_db: self.snr_offset_db,
            },
        }
    }

    pub fn validate(&self, model: &CneConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 {
            return bad("epochs, batches_per_epoch and batch_size must be positive".into());
        }
        if !(self.lr_initial > 0.0 && self.lr_final >= 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be positive".into());
        }
        if self.rates.is_empty() {
            return bad("at least one rate is required".into());
        }
        if model.code != self.code {
            return bad(format!("model is for {:?} codes, training for {:?}", model.code, self.code));
        }
        if self.phase == Phase::Pretrain && self.rates != [mother_rate(self.code)] {
            return bad(format!("pretraining uses the mother rate {} only", mother_rate(self.code)));
        }
        model.validate()
    }

    pub fn generator(&self, qpp: &QppTable) -> Result<DataGenerator> {
        DataGenerator::new(self.code, self.k, &self.rates, self.terminate(), self.snr_policy(), qpp)
    }
}

/// Configuration file layout shared with the checkpoint preamble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub model: CneConfig,
    pub training: TrainConfig,
}

impl TrainFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        f.training.validate(&f.model)?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub val_ber: f64,
}

/// Training state: the best model so far, the current weights, optimizer
/// moments and progress. Block data is drawn from seed streams indexed by
/// step, so these fields are the whole random state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub training: TrainConfig,
    pub best: CneParameters<T>,
    pub best_val_ber: f64,
    pub best_epoch: usize,
    pub current: CneParameters<T>,
    pub adam: Adam<T>,
    /// Completed epochs.
    pub epoch: usize,
    pub log: Vec<EpochLog>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: CneConfig,
    training: TrainConfig,
    state: State,
    #[serde(default)]
    log: Vec<EpochLog>,
}

#[derive(Serialize, Deserialize)]
struct State {
    epoch: usize,
    adam_step: u64,
    best_val_ber: f64,
    best_epoch: usize,
}

fn sub_archive(a: &TensorArchive, prefix: &str) -> TensorArchive {
    TensorArchive {
        preamble: a.preamble.clone(),
        entries: a
            .entries
            .iter()
            .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t.clone())))
            .collect(),
    }
}

impl<T: Real> Checkpoint<T> {
    pub fn model(&self) -> &CneConfig {
        &self.best.config
    }

    /// Stored values of the deployable (best) model's trainable tensors.
    pub fn parameter_elements(a: &TensorArchive) -> usize {
        a.entries.iter().filter(|(n, _)| n.starts_with("param.")).map(|(_, t)| t.len()).sum()
    }

    /// The best model is stored under the plain `param.*` / `bn.*` names so
    /// the file also loads as a bare model.
    pub fn to_archive(&self) -> TensorArchive {
        let meta = Meta {
            model: self.best.config.clone(),
            training: self.training.clone(),
            state: State {
                epoch: self.epoch,
                adam_step: self.adam.step,
                best_val_ber: self.best_val_ber,
                best_epoch: self.best_epoch,
            },
            log: self.log.clone(),
        };
        let mut a = self.best.to_archive();
        a.preamble = toml::to_string(&meta).expect("checkpoint metadata serializes");
        for (n, t) in self.current.to_archive().entries {
            a.entries.push((format!("train.{n}"), t));
        }
        for ((name, _), (m, v)) in self.current.named().iter().zip(self.adam.m.iter().zip(&self.adam.v)) {
            a.push(format!("adam.m.{name}"), m);
            a.push(format!("adam.v.{name}"), v);
        }
        a
    }

    pub fn from_archive(a: &TensorArchive) -> Result<Self> {
        let meta: Meta = toml::from_str(&a.preamble).map_err(|e| Error::Checkpoint(format!("bad checkpoint header: {e}")))?;
        let best = CneParameters::from_archive(a, Some(&meta.model))?;
        let current = CneParameters::from_archive(&sub_archive(a, "train."), Some(&meta.model))?;
        let mut adam = Adam::new(&[]);
        for (name, t) in current.named() {
            adam.m.push(a.expect(&format!("adam.m.{name}"), t.shape())?);
            adam.v.push(a.expect(&format!("adam.v.{name}"), t.shape())?);
        }
        adam.step = meta.state.adam_step;
        Ok(Self {
            training: meta.training,
            best,
            best_val_ber: meta.state.best_val_ber,
            best_epoch: meta.state.best_epoch,
            current,
            adam,
            epoch: meta.state.epoch,
            log: meta.log,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&TensorArchive::load(path)?)
    }
}

/// Forward pass over a batch, `[B, S, 1]` logits.
fn forward_batch<T: Real>(
    tape: &mut Tape<T>,
    params: &CneParameters<T>,
    vars: &crate::cne::CneVars,
    inputs: &BatchInputs<T>,
    interleaver: Option<&QppInterleaver>,
    updates: &mut BnUpdates<T>,
) -> Result<crate::autodiff::DiffArray> {
    match inputs {
        BatchInputs::Conv { l_m, p } => {
            let x = tape.constant(l_m.clone());
            let q = tape.constant(p.clone());
            cne_forward(tape, params, vars, 0, 0, x, q, BnMode::Train, updates)
        }
        BatchInputs::Turbo(t) => {
            let pi = interleaver.ok_or_else(|| Error::Config("Turbo batch without interleaver".into()))?;
            cne_turbo_forward(tape, params, vars, t, pi, BnMode::Train, updates)
        }
    }
}

/// Mean BCE over the first `k` positions and its gradients, in the order of
/// [`CneParameters::named`].
pub fn loss_and_gradients<T: Real>(
    params: &CneParameters<T>,
    batch: &Batch<T>,
    k: usize,
    interleaver: Option<&QppInterleaver>,
) -> Result<(T, Vec<Tensor<T>>, BnUpdates<T>)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, true);
    let mut updates = Vec::new();
    let out = forward_batch(&mut tape, params, &vars, &batch.inputs, interleaver, &mut updates)?;
    let loss = tape.bce_with_logits(out, &batch.bits, k)?;
    let value = tape.value(loss).data()[0];
    let mut g = tape.backward(loss)?;
    let grads = vars
        .flat()
        .into_iter()
        .map(|v| g.take(v).unwrap_or_else(|| Tensor::zeros(tape.shape(v))))
        .collect();
    Ok((value, grads, updates))
}

/// Inference-mode logits of the first `k` positions of every block, `[B, k]`.
pub fn decode_logits<T: Real>(
    params: &CneParameters<T>,
    inputs: &BatchInputs<T>,
    k: usize,
    interleaver: Option<&QppInterleaver>,
) -> Result<Vec<T>> {
    let (all, s) = match inputs {
        BatchInputs::Conv { l_m, p } => (infer_conv(params, l_m, p)?, l_m.shape()[1]),
        BatchInputs::Turbo(t) => {
            let pi = interleaver.ok_or_else(|| Error::Config("Turbo batch without interleaver".into()))?;
            (infer_turbo(params, t, pi)?, t.llr_s.shape()[1])
        }
    };
    Ok(all.chunks(s).flat_map(|row| row[..k].iter().copied()).collect())
}

/// Scales all gradients by `max_norm / norm` when their joint L2 norm
/// exceeds `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// Counts bit errors of hard decisions `logit > 0`.
pub fn count_errors<T: Real>(logits: &[T], bits: &[u8]) -> usize {
    logits.iter().zip(bits).filter(|(l, &b)| (**l > T::zero()) != (b == 1)).count()
}

/// Epoch-by-epoch driver around a [`Checkpoint`].
pub struct Trainer<T> {
    state: Checkpoint<T>,
    generator: DataGenerator,
    validation: Vec<Batch<T>>,
}

impl<T: Real> Trainer<T> {
    /// Starts a run. Fine-tuning starts from the best model of `init`.
    pub fn new(model: &CneConfig, config: &TrainConfig, init: Option<&Checkpoint<T>>, qpp: &QppTable) -> Result<Self> {
        config.validate(model)?;
        let params = match (config.phase, init) {
            (_, Some(c)) => {
                if c.model() != model {
                    return Err(Error::Checkpoint(format!(
                        "initial checkpoint model {:?} does not match {:?}",
                        c.model(),
                        model
                    )));
                }
                c.best.clone()
            }
            (Phase::Finetune, None) => {
                return Err(Error::Checkpoint("fine-tuning needs a pretrained checkpoint".into()));
            }
            (Phase::Pretrain, None) => CneParameters::init(model, &mut block_rng(SampleDomain::Init, config.seed, 0))?,
        };
        let shapes: Vec<Vec<usize>> = params.named().iter().map(|(_, t)| t.shape().to_vec()).collect();
        let state = Checkpoint {
            training: config.clone(),
            best: params.clone(),
            best_val_ber: f64::INFINITY,
            best_epoch: 0,
            current: params,
            adam: Adam::new(&shapes),
            epoch: 0,
            log: Vec::new(),
        };
        Self::from_state(state, qpp)
    }

    /// Continues a saved run.
    pub fn resume(state: Checkpoint<T>, qpp: &QppTable) -> Result<Self> {
        state.training.validate(state.model())?;
        Self::from_state(state, qpp)
    }

    fn from_state(state: Checkpoint<T>, qpp: &QppTable) -> Result<Self> {
        let cfg = &state.training;
        let generator = cfg.generator(qpp)?;
        let validation = (0..cfg.validation_blocks.div_ceil(cfg.batch_size))
            .map(|i| {
                let first = i * cfg.batch_size;
                let n = cfg.batch_size.min(cfg.validation_blocks - first);
                generator.batch(SampleDomain::Validation, cfg.seed, first as u64, n)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            state,
            generator,
            validation,
        })
    }

    pub fn state(&self) -> &Checkpoint<T> {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint<T> {
        self.state
    }

    pub fn finished(&self) -> bool {
        self.state.epoch >= self.state.training.epochs
    }

    /// BER of a model on the validation blocks.
    pub fn validation_ber(&self, params: &CneParameters<T>) -> Result<f64> {
        let k = self.generator.k();
        let (mut errors, mut total) = (0usize, 0usize);
        for b in &self.validation {
            let logits = decode_logits(params, &b.inputs, k, self.generator.interleaver())?;
            errors += count_errors(&logits, &b.bits);
            total += b.bits.len();
        }
        Ok(if total == 0 { 0.0 } else { errors as f64 / total as f64 })
    }

    /// Runs one epoch and returns its log entry.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        if self.finished() {
            return Err(Error::Config("training already finished".into()));
        }
        let cfg = self.state.training.clone();
        let sched = cfg.schedule();
        let k = self.generator.k();
        let epoch = self.state.epoch;
        let mut loss_sum = 0.0;
        let mut lr = cfg.lr_initial;
        for b in 0..cfg.batches_per_epoch {
            let step = epoch * cfg.batches_per_epoch + b;
            let batch = self.generator.batch(
                SampleDomain::Train,
                cfg.seed,
                (step * cfg.batch_size) as u64,
                cfg.batch_size,
            )?;
            let (loss, mut grads, updates) = loss_and_gradients(&self.state.current, &batch, k, self.generator.interleaver())?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at step {step}")));
            }
            loss_sum += loss.as_f64();
            if let Some(c) = cfg.grad_clip {
                clip_global_norm(&mut grads, c);
            }
            lr = sched.lr(step);
            let mut params = self.state.current.tensors_mut();
            self.state.adam.update(&mut params, &grads, lr)?;
            for (head, stats) in &updates {
                self.state.current.heads[*head].bn.update(stats);
            }
        }
        let val_ber = self.validation_ber(&self.state.current)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / cfg.batches_per_epoch as f64,
            lr,
            val_ber,
        };
        if val_ber < self.state.best_val_ber {
            self.state.best = self.state.current.clone();
            self.state.best_val_ber = val_ber;
            self.state.best_epoch = epoch + 1;
        }
        self.state.epoch += 1;
        self.state.log.push(entry);
        Ok(entry)
    }

    pub fn run(mut self, mut on_epoch: impl FnMut(&EpochLog, &Checkpoint<T>) -> Result<()>) -> Result<Checkpoint<T>> {
        while !self.finished() {
            let e = self.run_epoch()?;
            on_epoch(&e, &self.state)?;
        }
        Ok(self.state)
    }
}

/// Trains to completion.
pub fn train<T: Real>(
    model: &CneConfig,
    config: &TrainConfig,
    init: Option<&Checkpoint<T>>,
    qpp: &QppTable,
) -> Result<Checkpoint<T>> {
    Trainer::new(model, config, init, qpp)?.run(|_, _| Ok(()))
}
