//! Modulation, AWGN and frequency-selective MIMO channels, channel
//! estimation, MMSE detection and soft demapping.

mod constellation;
pub mod linalg;
mod llr;
mod mimo;
mod noise;

pub use constellation::{Constellation, Modulation};
pub use linalg::CMatrix;
pub use llr::{bpsk_llr, demap_llr, normalize_llr, DemapMode, NORMALIZE_EPS};
pub use mimo::{
    dft_pilots, estimate_channel, ls_estimate, mmse_detect, mmse_equalize, mmse_matrix, rayleigh_mimo,
    ChannelRealization, MMSE_LAMBDA,
};
pub use noise::{awgn, awgn_complex, ebn0_to_esn0, esn0_to_ebn0, NoiseSpec};
