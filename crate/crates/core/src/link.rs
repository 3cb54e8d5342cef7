//! End-to-end transmit/receive chain shared by training and simulation:
//! encode, rate-match, modulate, channel, detect and demap, then
//! de-rate-match into decoder inputs.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    awgn_complex, demap_llr, dft_pilots, estimate_channel, mmse_equalize, normalize_llr, rayleigh_mimo,
    ChannelRealization, Constellation, DemapMode, Modulation, NoiseSpec, NORMALIZE_EPS,
};
use crate::cne::CodeKind;
use crate::codec::{conv_encode, turbo_encode, QppInterleaver, QppTable, Trellis, TurboTail};
use crate::error::{Error, Result};
use crate::rate::CodeRate;
use crate::ratematch::{derate_turbo, LlrMatrix, PunctureIndicator, PuncturingPattern, RateMatchPlan, TurboDerated};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemapKind {
    /// Exact BPSK LLRs on AWGN, max-log for other AWGN constellations and
    /// the Euclidean distance form after MIMO detection.
    #[default]
    Auto,
    Exact,
    MaxLog,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotKind {
    Dft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub channel: ChannelKind,
    pub modulation: Modulation,
    pub demap: DemapKind,
    pub taps: usize,
    pub antennas: usize,
    pub fft_size: usize,
    pub pilot: PilotKind,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            channel: ChannelKind::Awgn,
            modulation: Modulation::Bpsk,
            demap: DemapKind::Auto,
            taps: 3,
            antennas: 4,
            fft_size: 64,
            pilot: PilotKind::Dft,
        }
    }
}

impl ChannelConfig {
    pub fn rayleigh_16qam() -> Self {
        Self {
            channel: ChannelKind::Rayleigh,
            modulation: Modulation::Qam16,
            ..Self::default()
        }
    }

    fn demap_mode<T: Real>(&self, sigma2: f64) -> Result<DemapMode<T>> {
        let s = T::lit(sigma2.max(1e-12));
        Ok(match (self.demap, self.channel, self.modulation) {
            (DemapKind::Auto, ChannelKind::Awgn, Modulation::Bpsk) | (DemapKind::Exact, ChannelKind::Awgn, Modulation::Bpsk) => {
                DemapMode::BpskExact { sigma2: s * T::lit(0.5) }
            }
            (DemapKind::Exact, _, _) => {
                return Err(Error::Config("exact demapping needs BPSK over AWGN".into()));
            }
            (DemapKind::Auto, ChannelKind::Awgn, _) | (DemapKind::MaxLog, _, _) => DemapMode::MaxLog { sigma2: s },
            (DemapKind::Auto, ChannelKind::Rayleigh, _) | (DemapKind::Euclidean, _, _) => DemapMode::Euclidean,
        })
    }
}

/// One code configuration of the link.
#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub code: CodeKind,
    pub k: usize,
    pub rate: CodeRate,
    pub terminate: bool,
    pub channel: ChannelConfig,
    trellis: Trellis,
    pattern: Option<PuncturingPattern>,
    interleaver: Option<QppInterleaver>,
    plan: Option<RateMatchPlan>,
}

impl LinkSpec {
    /// Builds the link; `qpp` supplies Turbo interleavers.
    pub fn new(
        code: CodeKind,
        k: usize,
        rate: CodeRate,
        terminate: bool,
        channel: ChannelConfig,
        qpp: &QppTable,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("block length must be positive".into()));
        }
        match code {
            CodeKind::Conv => {
                let pattern = PuncturingPattern::wifi(rate)?;
                Ok(Self {
                    code,
                    k,
                    rate,
                    terminate,
                    channel,
                    trellis: Trellis::wifi_k7(),
                    pattern: Some(pattern),
                    interleaver: None,
                    plan: None,
                })
            }
            CodeKind::Turbo => {
                let e = rate.exact_len(k).ok_or_else(|| {
                    Error::UnsupportedRate(format!("rate {rate} does not give an integer length for K={k}"))
                })?;
                let d = k + if terminate { 4 } else { 0 };
                let plan = RateMatchPlan::new(k, d, e)?;
                Ok(Self {
                    code,
                    k,
                    rate,
                    terminate,
                    channel,
                    trellis: Trellis::lte_turbo_constituent(),
                    pattern: None,
                    interleaver: Some(qpp.interleaver(k)?),
                    plan: Some(plan),
                })
            }
        }
    }

    /// Convolutional link with the default zero-tail termination.
    pub fn conv(k: usize, rate: CodeRate, channel: ChannelConfig) -> Result<Self> {
        Self::new(CodeKind::Conv, k, rate, true, channel, &QppTable::lte_defaults())
    }

    /// Unterminated Turbo link with the built-in interleaver table.
    pub fn turbo(k: usize, rate: CodeRate, channel: ChannelConfig) -> Result<Self> {
        Self::new(CodeKind::Turbo, k, rate, false, channel, &QppTable::lte_defaults())
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }
    pub fn interleaver(&self) -> Option<&QppInterleaver> {
        self.interleaver.as_ref()
    }

    /// Trellis steps of a convolutional block (including tail).
    pub fn conv_steps(&self) -> usize {
        self.k + if self.terminate { self.trellis.memory() } else { 0 }
    }

    /// Coded bits put on the channel per block.
    pub fn transmitted_len(&self) -> usize {
        match (&self.pattern, &self.plan) {
            (Some(p), _) => p.transmitted_len(self.conv_steps()),
            (_, Some(plan)) => plan.e(),
            _ => unreachable!("link has a pattern or a plan"),
        }
    }

    /// Encodes and rate-matches `bits`.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.k {
            return Err(Error::Framing(format!("expected {} information bits, got {}", self.k, bits.len())));
        }
        match self.code {
            CodeKind::Conv => {
                let cw = conv_encode(bits, &self.trellis, self.terminate)?;
                self.pattern.as_ref().expect("conv pattern").puncture(&cw.streams)
            }
            CodeKind::Turbo => {
                let cw = turbo_encode(bits, self.interleaver.as_ref().expect("interleaver"), self.terminate)?;
                self.plan.as_ref().expect("plan").select(&cw.rate_matcher_streams())
            }
        }
    }

    /// Sends one block of random information bits through the channel.
    pub fn transmit<T: Real, R: Rng + ?Sized>(&self, noise: NoiseSpec, rng: &mut R) -> Result<Transmission<T>> {
        let bits: Vec<u8> = (0..self.k).map(|_| rng.random_range(0..2u8)).collect();
        self.transmit_bits(bits, noise, rng)
    }

    pub fn transmit_bits<T: Real, R: Rng + ?Sized>(
        &self,
        bits: Vec<u8>,
        noise: NoiseSpec,
        rng: &mut R,
    ) -> Result<Transmission<T>> {
        let coded = self.encode(&bits)?;
        let llr = self.channel_llrs(&coded, noise, rng)?;
        Ok(Transmission { bits, llr })
    }

    /// Modulates coded bits, applies the channel and demaps to one LLR per
    /// coded bit (positive favours 1).
    pub fn channel_llrs<T: Real, R: Rng + ?Sized>(&self, coded: &[u8], noise: NoiseSpec, rng: &mut R) -> Result<Vec<T>> {
        let cfg = &self.channel;
        let con = Constellation::<T>::new(cfg.modulation);
        let m = con.bits_per_symbol();
        let mut padded = coded.to_vec();
        padded.resize(coded.len().div_ceil(m) * m, 0);
        let symbols = con.modulate(&padded)?;
        let mode = cfg.demap_mode::<T>(noise.sigma2)?;
        let detected: Vec<Complex<T>> = match cfg.channel {
            // BPSK rides the real axis of the complex baseband, so its noise
            // is sigma2 / 2 per real dimension like every other constellation
            ChannelKind::Awgn => awgn_complex(&symbols, noise, rng),
            ChannelKind::Rayleigh => {
                let nt = cfg.antennas;
                let per = symbols.len().div_ceil(nt);
                let mut streams = vec![Vec::with_capacity(per); nt];
                for (i, &s) in symbols.iter().enumerate() {
                    streams[i % nt].push(s);
                }
                for s in &mut streams {
                    s.resize(per, con.points()[0]);
                }
                let real = ChannelRealization::random(cfg.antennas, nt, cfg.taps, cfg.fft_size, rng)?;
                let rx = rayleigh_mimo(&streams, &real, noise, rng)?;
                let pilots = match cfg.pilot {
                    PilotKind::Dft => dft_pilots(nt),
                };
                let est = estimate_channel(&real, &pilots, noise, rng)?;
                let eq = mmse_equalize(&rx, &est, T::lit(noise.sigma2))?;
                (0..symbols.len()).map(|i| eq[i % nt][i / nt]).collect()
            }
        };
        let mut llr = demap_llr(&detected, &con, mode);
        llr.truncate(coded.len());
        Ok(llr)
    }

    /// De-rate-matches received LLRs, optionally standardizing them first.
    pub fn soft_input<T: Real>(&self, llr: &[T], normalize: bool) -> Result<SoftInput<T>> {
        let normalized;
        let llr = if normalize {
            normalized = normalize_llr(llr, T::lit(NORMALIZE_EPS));
            &normalized[..]
        } else {
            llr
        };
        match self.code {
            CodeKind::Conv => {
                let (llr, indicator) = self.pattern.as_ref().expect("pattern").depuncture(llr, self.conv_steps())?;
                Ok(SoftInput::Conv { llr, indicator })
            }
            CodeKind::Turbo => {
                let mut d = derate_turbo(llr, self.plan.as_ref().expect("plan"))?;
                let tail = if self.terminate {
                    let k = self.k;
                    let take = |v: &mut Vec<T>| {
                        let t: [T; 4] = v[k..k + 4].try_into().expect("4 tail values");
                        v.truncate(k);
                        t
                    };
                    let s = [take(&mut d.llr_s), take(&mut d.llr_z), take(&mut d.llr_zp)];
                    for p in [&mut d.p_s, &mut d.p_z, &mut d.p_zp] {
                        p.truncate(k);
                    }
                    Some(TurboTail::from_streams(s))
                } else {
                    None
                };
                Ok(SoftInput::Turbo { streams: d, tail })
            }
        }
    }
}

/// Information bits and the demapped channel LLRs of one block.
#[derive(Debug, Clone)]
pub struct Transmission<T> {
    pub bits: Vec<u8>,
    pub llr: Vec<T>,
}

/// Decoder-ready inputs.
#[derive(Debug, Clone)]
pub enum SoftInput<T> {
    Conv {
        llr: LlrMatrix<T>,
        indicator: PunctureIndicator,
    },
    Turbo {
        streams: TurboDerated<T>,
        tail: Option<TurboTail<T>>,
    },
}
