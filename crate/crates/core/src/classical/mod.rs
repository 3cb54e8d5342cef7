//! Classical baselines: windowed soft Viterbi, max-log-MAP SISO and the
//! iterative Turbo decoder.

mod siso;
mod turbo;
mod viterbi;

pub use siso::{maxlog_siso, SisoBeliefs};
pub use turbo::{turbo_decode_classical, TurboDecoded, DEFAULT_TURBO_ITERATIONS};
pub use viterbi::{viterbi_decode, viterbi_forward, PathMetrics, ViterbiConfig, DEFAULT_TRACEBACK};
