//! Data generation, balanced-SNR scheduling, Adam with cosine decay and the
//! pretrain / fine-tune loop with resumable checkpoints.

mod data;
mod optim;
mod trainer;

pub use data::{block_rng, block_seed, Batch, BatchInputs, DataGenerator, Sample, SampleDomain, SnrPolicy};
pub use optim::{bbt_snr, bbt_snr_for, bce_loss, Adam, CosineSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use trainer::{
    clip_global_norm, count_errors, decode_logits, loss_and_gradients, mother_rate, train, Checkpoint, EpochLog, Phase, TrainConfig,
    TrainFile, Trainer,
};
