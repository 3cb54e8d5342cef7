//! Bit-exact encoders: the 802.11 feed-forward convolutional code, the LTE
//! parallel-concatenated Turbo code and its QPP interleaver.

mod conv;
mod qpp;
mod trellis;
mod turbo;

pub use conv::{conv_encode, final_state, ConvCodeword};
pub use qpp::{QppInterleaver, QppTable};
pub use trellis::{octal, parse_octal, Trellis};
pub use turbo::{rsc_encode, turbo_encode, CodewordStreams, TurboTail};
