//! The convolutional neural engine: puncture-gated embedding, batch norm,
//! bidirectional LSTM stack and scalar head, plus the iterative Turbo
//! wrapper built from two CNE calls per iteration.

mod config;
mod forward;
mod params;

pub use config::{CneConfig, CodeKind, TurboWeightLayout};
pub use forward::{
    cne_embed, cne_forward, cne_turbo_forward, cne_turbo_forward_unrolled, infer_conv, infer_turbo, BnUpdates,
    TurboInputs,
};
pub use params::{model_config, BatchNormState, CneHead, CneParameters, CneVars, DirVars, HeadVars, LstmDirection, LstmStack};
