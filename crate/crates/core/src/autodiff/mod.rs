//! A small reverse-mode differentiation engine: dense affine maps,
//! pointwise activations, concatenation and slicing, sequence gathers,
//! batch normalization, a fused LSTM layer and a logit-form BCE loss.

mod archive;
mod gradcheck;
mod la;
mod lstm;
mod tape;
mod tensor;

pub use archive::{TensorArchive, ARCHIVE_VERSION};
pub use gradcheck::{compare_gradients, grad_check, relative_error, GradCheckReport, GRAD_CHECK_STEP};
pub use tape::{BnBatchStats, BnMode, DiffArray, Gradients, Tape};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
