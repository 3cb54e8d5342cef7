use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{BerReport, BerRow};
use crate::autodiff::TensorArchive;
use crate::channel::{ebn0_to_esn0, esn0_to_ebn0, Constellation, NoiseSpec};
use crate::classical::{turbo_decode_classical, viterbi_decode, ViterbiConfig, DEFAULT_TRACEBACK, DEFAULT_TURBO_ITERATIONS};
use crate::cne::{CneParameters, CodeKind};
use crate::codec::QppTable;
use crate::error::{Error, Result};
use crate::link::{ChannelConfig, LinkSpec, SoftInput, Transmission};
use crate::rate::CodeRate;
use crate::scalar::Real;
use crate::training::{block_rng, decode_logits, BatchInputs, SampleDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Viterbi,
    Bcjr,
    Cne,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Viterbi => "viterbi",
            Self::Bcjr => "bcjr",
            Self::Cne => "cne",
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viterbi" => Ok(Self::Viterbi),
            "bcjr" => Ok(Self::Bcjr),
            "cne" => Ok(Self::Cne),
            _ => Err(Error::Config(format!("unknown decoder {s:?} (viterbi, bcjr, cne)"))),
        }
    }
}

/// Which SNR the configured points denote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrAxis {
    #[default]
    Esn0,
    Ebn0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub code: CodeKind,
    pub decoder: DecoderKind,
    pub lengths: Vec<usize>,
    pub rates: Vec<CodeRate>,
    pub snr_db: Vec<f64>,
    pub snr_axis: SnrAxis,
    /// Block budget per cell.
    pub blocks: usize,
    /// Stop a cell once this many bit errors are collected; 0 disables.
    pub min_errors: u64,
    /// Blocks simulated between early-stop checks (and the CNE batch size).
    pub chunk: usize,
    pub seed: u64,
    pub iterations: usize,
    pub traceback: usize,
    pub terminate: Option<bool>,
    pub checkpoint: Option<PathBuf>,
    pub qpp_table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub channel: ChannelConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            code: CodeKind::Conv,
            decoder: DecoderKind::Viterbi,
            lengths: vec![120],
            rates: vec![CodeRate::new(1, 2).expect("1/2")],
            snr_db: vec![0.0, 1.0, 2.0, 3.0],
            snr_axis: SnrAxis::Esn0,
            blocks: 1000,
            min_errors: 500,
            chunk: 64,
            seed: 1,
            iterations: DEFAULT_TURBO_ITERATIONS,
            traceback: DEFAULT_TRACEBACK,
            terminate: None,
            checkpoint: None,
            qpp_table: None,
            out: None,
            plot: None,
            channel: ChannelConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn terminate(&self) -> bool {
        self.terminate.unwrap_or(self.code == CodeKind::Conv)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.lengths.is_empty() || self.rates.is_empty() || self.snr_db.is_empty() {
            return bad("lengths, rates and snr_db must be non-empty");
        }
        if self.chunk == 0 {
            return bad("chunk must be positive");
        }
        match (self.decoder, self.code) {
            (DecoderKind::Viterbi, CodeKind::Turbo) => bad("the Viterbi decoder applies to convolutional codes"),
            (DecoderKind::Bcjr, CodeKind::Conv) => bad("the BCJR decoder applies to Turbo codes"),
            (DecoderKind::Cne, _) if self.checkpoint.is_none() => {
                Err(Error::Checkpoint("the cne decoder needs a checkpoint".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn qpp(&self) -> Result<QppTable> {
        match &self.qpp_table {
            Some(p) => QppTable::load(p),
            None => Ok(QppTable::lte_defaults()),
        }
    }
}

/// A ready-to-run decoder.
#[derive(Debug, Clone)]
pub enum Decoder<T> {
    Viterbi(ViterbiConfig),
    Bcjr { iterations: usize },
    Cne(Box<CneParameters<T>>),
}

impl<T: Real> Decoder<T> {
    pub fn kind(&self) -> DecoderKind {
        match self {
            Self::Viterbi(_) => DecoderKind::Viterbi,
            Self::Bcjr { .. } => DecoderKind::Bcjr,
            Self::Cne(_) => DecoderKind::Cne,
        }
    }

    /// Builds the decoder described by a sweep; CNE weights come from the
    /// checkpoint, whose model must be for the configured code.
    pub fn from_sweep(cfg: &SweepConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.decoder {
            DecoderKind::Viterbi => Self::Viterbi(ViterbiConfig {
                traceback_depth: cfg.traceback,
                terminated: cfg.terminate(),
            }),
            DecoderKind::Bcjr => Self::Bcjr {
                iterations: cfg.iterations,
            },
            DecoderKind::Cne => {
                let path = cfg.checkpoint.as_deref().expect("validated");
                let params = load_model(path)?;
                if params.config.code != cfg.code {
                    return Err(Error::Checkpoint(format!(
                        "{}: model decodes {:?} codes, sweep is for {:?}",
                        path.display(),
                        params.config.code,
                        cfg.code
                    )));
                }
                Self::Cne(Box::new(params))
            }
        })
    }

    /// Decodes the received LLRs of several blocks of one link.
    pub fn decode(&self, link: &LinkSpec, received: &[&[T]]) -> Result<Vec<Vec<u8>>> {
        match self {
            Self::Viterbi(vc) => received
                .par_iter()
                .map(|llr| match link.soft_input(llr, false)? {
                    SoftInput::Conv { llr, .. } => viterbi_decode(&llr.values, link.trellis(), *vc),
                    SoftInput::Turbo { .. } => Err(Error::Config("Viterbi decoding of a Turbo link".into())),
                })
                .collect(),
            Self::Bcjr { iterations } => received
                .par_iter()
                .map(|llr| match link.soft_input(llr, false)? {
                    SoftInput::Turbo { streams: d, tail } => {
                        let pi = link.interleaver().expect("Turbo link has an interleaver");
                        Ok(turbo_decode_classical(&d.llr_s, &d.llr_z, &d.llr_zp, pi, *iterations, tail.as_ref())?.bits)
                    }
                    SoftInput::Conv { .. } => Err(Error::Config("BCJR decoding of a convolutional link".into())),
                })
                .collect(),
            Self::Cne(params) => {
                let inputs = received
                    .par_iter()
                    .map(|llr| link.soft_input(llr, true))
                    .collect::<Result<Vec<_>>>()?;
                let batch = BatchInputs::stack(&inputs.iter().collect::<Vec<_>>())?;
                let logits = decode_logits(params, &batch, link.k, link.interleaver())?;
                Ok(logits
                    .chunks(link.k)
                    .map(|row| row.iter().map(|&l| (l > T::zero()) as u8).collect())
                    .collect())
            }
        }
    }
}

/// Loads CNE weights from a training checkpoint or a bare model archive.
pub fn load_model<T: Real>(path: &Path) -> Result<CneParameters<T>> {
    let a = TensorArchive::load(path)?;
    CneParameters::from_archive(&a, None).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Error counts of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub blocks: u64,
    pub bit_errors: u64,
    pub block_errors: u64,
}

/// Simulates one cell. Block `i` always uses the seed `(Test, seed, i)`,
/// chunks are reduced in order and the stop rule is checked only between
/// chunks, so results do not depend on the worker count.
pub fn simulate_cell<T: Real>(
    link: &LinkSpec,
    decoder: &Decoder<T>,
    noise: NoiseSpec,
    blocks: usize,
    min_errors: u64,
    chunk: usize,
    seed: u64,
) -> Result<CellCounts> {
    let mut c = CellCounts::default();
    let mut next = 0usize;
    while next < blocks {
        let n = chunk.min(blocks - next);
        let tx = (next..next + n)
            .into_par_iter()
            .map(|i| link.transmit::<T, _>(noise, &mut block_rng(SampleDomain::Test, seed, i as u64)))
            .collect::<Result<Vec<Transmission<T>>>>()?;
        let received: Vec<&[T]> = tx.iter().map(|t| &t.llr[..]).collect();
        let decoded = decoder.decode(link, &received)?;
        for (t, d) in tx.iter().zip(&decoded) {
            let e = t.bits.iter().zip(d).filter(|(a, b)| a != b).count() as u64;
            c.bit_errors += e;
            c.block_errors += (e > 0) as u64;
        }
        c.blocks += n as u64;
        next += n;
        if min_errors > 0 && c.bit_errors >= min_errors {
            break;
        }
    }
    Ok(c)
}

fn code_name(code: CodeKind) -> &'static str {
    match code {
        CodeKind::Conv => "conv",
        CodeKind::Turbo => "turbo",
    }
}

/// Runs every (K, rate, SNR) cell of a sweep.
pub fn run_sweep<T: Real>(cfg: &SweepConfig) -> Result<BerReport> {
    let decoder = Decoder::<T>::from_sweep(cfg)?;
    run_sweep_with(cfg, &decoder)
}

pub fn run_sweep_with<T: Real>(cfg: &SweepConfig, decoder: &Decoder<T>) -> Result<BerReport> {
    cfg.validate()?;
    let qpp = cfg.qpp()?;
    let m = Constellation::<f64>::new(cfg.channel.modulation).bits_per_symbol();
    let mut report = BerReport::default();
    for &k in &cfg.lengths {
        for &rate in &cfg.rates {
            let link = LinkSpec::new(cfg.code, k, rate, cfg.terminate(), cfg.channel.clone(), &qpp)?;
            for &x in &cfg.snr_db {
                let (esn0, ebn0) = match cfg.snr_axis {
                    SnrAxis::Esn0 => (x, esn0_to_ebn0(x, rate.as_f64(), m)),
                    SnrAxis::Ebn0 => (ebn0_to_esn0(x, rate.as_f64(), m), x),
                };
                let c = simulate_cell(
                    &link,
                    decoder,
                    NoiseSpec::from_snr_db(esn0),
                    cfg.blocks,
                    cfg.min_errors,
                    cfg.chunk,
                    cfg.seed,
                )?;
                report.rows.push(BerRow::from_counts(
                    decoder.kind().name(),
                    code_name(cfg.code),
                    k,
                    &rate.to_string(),
                    &format!("{:?}", cfg.channel.channel).to_lowercase(),
                    &cfg.channel.modulation.to_string(),
                    esn0,
                    ebn0,
                    c.blocks,
                    c.bit_errors,
                    c.block_errors,
                    cfg.seed,
                ));
            }
        }
    }
    report.sort();
    Ok(report)
}
