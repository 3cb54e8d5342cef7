use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::bbt_snr_for;
use crate::autodiff::Tensor;
use crate::channel::NoiseSpec;
use crate::cne::{CodeKind, TurboInputs};
use crate::codec::{QppInterleaver, QppTable};
use crate::error::{Error, Result};
use crate::link::{ChannelConfig, LinkSpec, SoftInput};
use crate::rate::CodeRate;
use crate::scalar::Real;

/// Independent seed streams. The domain occupies the top two bits of every
/// block seed, so seeds from different domains can never coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleDomain {
    Train = 0,
    Validation = 1,
    Test = 2,
    /// Parameter initialization and other non-block draws.
    Init = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of block `index` in `domain` under `master`.
pub fn block_seed(domain: SampleDomain, master: u64, index: u64) -> u64 {
    let mixed = splitmix64(splitmix64(master) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    ((domain as u64) << 62) | (mixed >> 2)
}

pub fn block_rng(domain: SampleDomain, master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(block_seed(domain, master, index))
}

/// How the channel SNR of a training sample is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrPolicy {
    Fixed(f64),
    /// `bbt_snr(R, offset)` for the sample's rate.
    Balanced { offset_db: f64 },
}

impl SnrPolicy {
    pub fn snr_db(self, rate: CodeRate) -> f64 {
        match self {
            SnrPolicy::Fixed(s) => s,
            SnrPolicy::Balanced { offset_db } => bbt_snr_for(rate, offset_db),
        }
    }
}

/// Decoder inputs for a batch of equal-length blocks.
#[derive(Debug, Clone)]
pub enum BatchInputs<T> {
    /// `[B, S, 2]` LLRs and puncture indicators.
    Conv { l_m: Tensor<T>, p: Tensor<T> },
    Turbo(TurboInputs<T>),
}

impl<T: Real> BatchInputs<T> {
    /// Stacks de-rate-matched blocks.
    pub fn stack(blocks: &[&SoftInput<T>]) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::DegenerateBatch("empty batch".into()))?;
        let b = blocks.len();
        match first {
            SoftInput::Conv { llr, .. } => {
                let (s, w) = (llr.rows, llr.streams);
                let mut l = Vec::with_capacity(b * s * w);
                let mut p = Vec::with_capacity(b * s * w);
                for blk in blocks {
                    match blk {
                        SoftInput::Conv { llr, indicator } if llr.rows == s && llr.streams == w => {
                            l.extend_from_slice(&llr.values);
                            p.extend(indicator.flags.iter().map(|&f| T::lit(f as f64)));
                        }
                        _ => return Err(Error::Shape("mixed block shapes in one batch".into())),
                    }
                }
                Ok(Self::Conv {
                    l_m: Tensor::new(&[b, s, w], l)?,
                    p: Tensor::new(&[b, s, w], p)?,
                })
            }
            SoftInput::Turbo { streams, .. } => {
                let k = streams.llr_s.len();
                let mut cols: [Vec<T>; 6] = Default::default();
                for blk in blocks {
                    let SoftInput::Turbo { streams: d, .. } = blk else {
                        return Err(Error::Shape("mixed block kinds in one batch".into()));
                    };
                    if d.llr_s.len() != k {
                        return Err(Error::Shape("mixed block lengths in one batch".into()));
                    }
                    cols[0].extend_from_slice(&d.llr_s);
                    cols[1].extend_from_slice(&d.llr_z);
                    cols[2].extend_from_slice(&d.llr_zp);
                    for (c, flags) in cols[3..].iter_mut().zip([&d.p_s, &d.p_z, &d.p_zp]) {
                        c.extend(flags.iter().map(|&f| T::lit(f as f64)));
                    }
                }
                let [a, z, zp, ps, pz, pzp] = cols.map(|c| Tensor::new(&[b, k], c));
                Ok(Self::Turbo(TurboInputs {
                    llr_s: a?,
                    llr_z: z?,
                    llr_zp: zp?,
                    p_s: ps?,
                    p_z: pz?,
                    p_zp: pzp?,
                }))
            }
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            Self::Conv { l_m, .. } => l_m.shape()[0],
            Self::Turbo(t) => t.llr_s.shape()[0],
        }
    }
}

/// One generated block.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub seed: u64,
    pub rate: CodeRate,
    pub snr_db: f64,
    pub bits: Vec<u8>,
    pub input: SoftInput<T>,
}

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub inputs: BatchInputs<T>,
    /// `[B, K]` row-major.
    pub bits: Vec<u8>,
    pub rates: Vec<CodeRate>,
    pub snr_db: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Random bits through the full link: encode, rate-match, BPSK over AWGN,
/// exact demapping, LLR standardization and de-rate-matching.
#[derive(Debug, Clone)]
pub struct DataGenerator {
    links: Vec<LinkSpec>,
    snr: SnrPolicy,
}

impl DataGenerator {
    pub fn new(code: CodeKind, k: usize, rates: &[CodeRate], terminate: bool, snr: SnrPolicy, qpp: &QppTable) -> Result<Self> {
        Self::with_channel(code, k, rates, terminate, snr, ChannelConfig::default(), qpp)
    }

    pub fn with_channel(
        code: CodeKind,
        k: usize,
        rates: &[CodeRate],
        terminate: bool,
        snr: SnrPolicy,
        channel: ChannelConfig,
        qpp: &QppTable,
    ) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Config("at least one rate is required".into()));
        }
        let links = rates
            .iter()
            .map(|&r| LinkSpec::new(code, k, r, terminate, channel.clone(), qpp))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { links, snr })
    }

    pub fn k(&self) -> usize {
        self.links[0].k
    }

    pub fn rates(&self) -> Vec<CodeRate> {
        self.links.iter().map(|l| l.rate).collect()
    }

    pub fn interleaver(&self) -> Option<&QppInterleaver> {
        self.links[0].interleaver()
    }

    /// Generates the block with the given seed. The rate is drawn uniformly
    /// from the configured set.
    pub fn sample<T: Real>(&self, seed: u64) -> Result<Sample<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let link = &self.links[rng.random_range(0..self.links.len())];
        let snr_db = self.snr.snr_db(link.rate);
        let t = link.transmit::<T, _>(NoiseSpec::from_snr_db(snr_db), &mut rng)?;
        let input = link.soft_input(&t.llr, true)?;
        Ok(Sample {
            seed,
            rate: link.rate,
            snr_db,
            bits: t.bits,
            input,
        })
    }

    /// Blocks `first .. first + size` of `domain`.
    pub fn batch<T: Real>(&self, domain: SampleDomain, master: u64, first: u64, size: usize) -> Result<Batch<T>> {
        let samples = (0..size as u64)
            .map(|i| self.sample(block_seed(domain, master, first + i)))
            .collect::<Result<Vec<Sample<T>>>>()?;
        let inputs = BatchInputs::stack(&samples.iter().map(|s| &s.input).collect::<Vec<_>>())?;
        Ok(Batch {
            inputs,
            bits: samples.iter().flat_map(|s| s.bits.iter().copied()).collect(),
            rates: samples.iter().map(|s| s.rate).collect(),
            snr_db: samples.iter().map(|s| s.snr_db).collect(),
            seeds: samples.iter().map(|s| s.seed).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::optim::bbt_snr;
    use std::collections::HashSet;

    fn rates(s: &[&str]) -> Vec<CodeRate> {
        s.iter().map(|r| r.parse().unwrap()).collect()
    }

    #[test]
    fn domains_never_share_seeds() {
        let train: HashSet<u64> = (0..20_000).map(|i| block_seed(SampleDomain::Train, 7, i)).collect();
        let test: HashSet<u64> = (0..20_000).map(|i| block_seed(SampleDomain::Test, 7, i)).collect();
        let val: HashSet<u64> = (0..20_000).map(|i| block_seed(SampleDomain::Validation, 7, i)).collect();
        assert_eq!(train.len(), 20_000);
        assert!(train.is_disjoint(&test));
        assert!(train.is_disjoint(&val));
        assert!(val.is_disjoint(&test));
        assert_ne!(block_seed(SampleDomain::Train, 7, 0), block_seed(SampleDomain::Train, 8, 0));
    }

    #[test]
    fn conv_batch_shapes_and_tags() {
        let g = DataGenerator::new(
            CodeKind::Conv,
            24,
            &rates(&["1/2", "2/3", "3/4"]),
            true,
            SnrPolicy::Balanced { offset_db: 2.5 },
            &QppTable::lte_defaults(),
        )
        .unwrap();
        let b: Batch<f32> = g.batch(SampleDomain::Train, 1, 0, 16).unwrap();
        match &b.inputs {
            BatchInputs::Conv { l_m, p } => {
                assert_eq!(l_m.shape(), &[16, 30, 2]);
                assert_eq!(p.shape(), &[16, 30, 2]);
                for (l, q) in l_m.data().iter().zip(p.data()) {
                    if *q == 0.0 {
                        assert_eq!(*l, 0.0);
                    }
                }
            }
            _ => panic!(),
        }
        assert_eq!(b.bits.len(), 16 * 24);
        for (r, s) in b.rates.iter().zip(&b.snr_db) {
            assert_eq!(*s, bbt_snr(r.as_f64(), 2.5).unwrap());
        }
    }

    #[test]
    fn fine_tune_batches_mix_rates() {
        let g = DataGenerator::new(
            CodeKind::Turbo,
            48,
            &rates(&["1/3", "1/2", "2/3", "3/4"]),
            false,
            SnrPolicy::Balanced { offset_db: 1.5 },
            &QppTable::lte_defaults(),
        )
        .unwrap();
        // P(single rate in a batch of 8) = 4^-7, so all 100 must mix.
        for i in 0..100 {
            let b: Batch<f32> = g.batch(SampleDomain::Train, 3, i * 8, 8).unwrap();
            let distinct: HashSet<_> = b.rates.iter().collect();
            assert!(distinct.len() >= 2);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let g = DataGenerator::new(
            CodeKind::Conv,
            24,
            &rates(&["1/2"]),
            true,
            SnrPolicy::Fixed(0.0),
            &QppTable::lte_defaults(),
        )
        .unwrap();
        let a: Batch<f64> = g.batch(SampleDomain::Train, 5, 10, 4).unwrap();
        let b: Batch<f64> = g.batch(SampleDomain::Train, 5, 10, 4).unwrap();
        let c: Batch<f64> = g.batch(SampleDomain::Train, 5, 11, 4).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.seeds, b.seeds);
        assert_eq!(&a.seeds[1..], &c.seeds[..3]);
        if let (BatchInputs::Conv { l_m: x, .. }, BatchInputs::Conv { l_m: y, .. }) = (&a.inputs, &b.inputs) {
            assert_eq!(x, y);
        }
    }
}
