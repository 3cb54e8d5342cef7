//! Rate matching: 802.11 bit stealing for the convolutional code and the
//! LTE sub-block interleaver / circular buffer for the Turbo code, together
//! with the receive-side inverses that rebuild full-length LLR blocks and
//! their puncture indicators.

mod puncture;
mod turbo;

pub use puncture::{derate_conv, puncture_conv, LlrMatrix, PunctureIndicator, PuncturingPattern};
pub use turbo::{derate_turbo, turbo_rate_match, RateMatchPlan, TurboDerated};
