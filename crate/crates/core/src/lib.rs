//! Channel-coding workbench for punctured convolutional and Turbo codes.
//!
//! The crate covers the whole link: bit-exact 802.11 / LTE encoders and rate
//! matching, AWGN and Rayleigh-MIMO channels with LS estimation and MMSE
//! detection, classical Viterbi and max-log-MAP decoders, and an LSTM-based
//! neural decoder (the convolutional neural engine, CNE) built on a small
//! reverse-mode differentiation engine. A Monte-Carlo harness and a
//! complexity cost model sit on top.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! type for the common cases (`f32` for training and sweeps, `f64` for
//! verification).

pub mod autodiff;
pub mod channel;
pub mod classical;
pub mod cne;
pub mod codec;
pub mod error;
pub mod harness;
pub mod link;
pub mod rate;
pub mod ratematch;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use rate::CodeRate;
pub use scalar::Real;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type CneParams32 = cne::CneParameters<f32>;
pub type CneParams64 = cne::CneParameters<f64>;
pub type Checkpoint32 = training::Checkpoint<f32>;
pub type Checkpoint64 = training::Checkpoint<f64>;
pub type Trainer32 = training::Trainer<f32>;
pub type Trainer64 = training::Trainer<f64>;
