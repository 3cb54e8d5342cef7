//! Monte-Carlo BER sweeps, CSV reports and the complexity cost model.

mod cost;
mod report;
mod sweep;

pub use cost::{cost_model, formula_macs, instrumented_macs, mac_terms, CostReport, LatencyTerm, MacTerm, ShapeEntry};
pub use report::{binomial_ci, BerReport, BerRow, Z95};
pub use sweep::{load_model, run_sweep, run_sweep_with, simulate_cell, CellCounts, Decoder, DecoderKind, SnrAxis, SweepConfig};
