use crate::codec::CodewordStreams;
use crate::error::{Error, Result};
use crate::scalar::Real;

const COLUMNS: usize = 32;

/// Inter-column permutation of the 32-column sub-block interleaver.
const COLUMN_PERM: [usize; COLUMNS] = [
    0, 16, 8, 24, 4, 20, 12, 28, 2, 18, 10, 26, 6, 22, 14, 30, 1, 17, 9, 25, 5, 21, 13, 29, 3,
    19, 11, 27, 7, 23, 15, 31,
];

/// Selection plan of the LTE circular-buffer rate matcher (redundancy
/// version 0). Built from `(D, E)` alone, so transmitter and receiver derive
/// identical plans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateMatchPlan {
    k: usize,
    d: usize,
    e: usize,
    rows: usize,
    k0: usize,
    /// `(stream, index)` of every transmitted bit, in transmission order.
    selection: Vec<(u8, u32)>,
}

/// Sub-block interleaver output positions: `perm[j]` is the index into the
/// length-`D` stream read at interleaved position `j`, or `None` for filler.
fn subblock_positions(d: usize, stream: usize) -> (usize, Vec<Option<usize>>) {
    let rows = d.div_ceil(COLUMNS);
    let kpi = rows * COLUMNS;
    let dummies = kpi - d;
    let pos = (0..kpi)
        .map(|j| {
            let y = if stream < 2 {
                COLUMN_PERM[j / rows] + COLUMNS * (j % rows)
            } else {
                (COLUMN_PERM[j / rows] + COLUMNS * (j % rows) + 1) % kpi
            };
            y.checked_sub(dummies)
        })
        .collect();
    (rows, pos)
}

impl RateMatchPlan {
    /// `d` is the per-stream length (`K`, or `K + 4` with trellis tail).
    pub fn new(k: usize, d: usize, e: usize) -> Result<Self> {
        if k == 0 || d < k {
            return Err(Error::Config(format!("invalid stream length {d} for K={k}")));
        }
        if e < k {
            return Err(Error::UnsupportedRate(format!(
                "E={e} < K={k} would give a code rate above 1"
            )));
        }
        let (rows, p0) = subblock_positions(d, 0);
        let (_, p2) = subblock_positions(d, 2);
        let kpi = rows * COLUMNS;
        // Circular buffer: v0 block, then v1/v2 interlaced.
        let mut buffer: Vec<Option<(u8, u32)>> = Vec::with_capacity(3 * kpi);
        buffer.extend(p0.iter().map(|p| p.map(|i| (0u8, i as u32))));
        for j in 0..kpi {
            buffer.push(p0[j].map(|i| (1u8, i as u32)));
            buffer.push(p2[j].map(|i| (2u8, i as u32)));
        }
        let k0 = 2 * rows;
        let kw = buffer.len();
        let mut selection = Vec::with_capacity(e);
        let mut j = 0;
        while selection.len() < e {
            if let Some(entry) = buffer[(k0 + j) % kw] {
                selection.push(entry);
            }
            j += 1;
        }
        Ok(Self {
            k,
            d,
            e,
            rows,
            k0,
            selection,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn stream_len(&self) -> usize {
        self.d
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn k0(&self) -> usize {
        self.k0
    }
    pub fn subblock_rows(&self) -> usize {
        self.rows
    }
    pub fn selection(&self) -> &[(u8, u32)] {
        &self.selection
    }

    /// Gathers the `E` transmitted values from the three streams.
    pub fn select<B: Copy>(&self, streams: &[Vec<B>; 3]) -> Result<Vec<B>> {
        if streams.iter().any(|s| s.len() != self.d) {
            return Err(Error::Shape(format!(
                "rate matcher expects three streams of length {}",
                self.d
            )));
        }
        Ok(self
            .selection
            .iter()
            .map(|&(s, i)| streams[s as usize][i as usize])
            .collect())
    }
}

/// Rate-matches a Turbo codeword to `e` bits.
pub fn turbo_rate_match(streams: &CodewordStreams, e: usize) -> Result<(Vec<u8>, RateMatchPlan)> {
    let plan = RateMatchPlan::new(streams.k(), streams.stream_len(), e)?;
    let bits = plan.select(&streams.rate_matcher_streams())?;
    Ok((bits, plan))
}

/// The six de-rate-matched vectors, each of the plan's stream length.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboDerated<T> {
    pub llr_s: Vec<T>,
    pub llr_z: Vec<T>,
    pub llr_zp: Vec<T>,
    pub p_s: Vec<u8>,
    pub p_z: Vec<u8>,
    pub p_zp: Vec<u8>,
}

/// Inverse of [`turbo_rate_match`]: scatters received LLRs back to their
/// stream positions. Repeated selections add; untouched positions stay 0
/// with indicator 0.
pub fn derate_turbo<T: Real>(received: &[T], plan: &RateMatchPlan) -> Result<TurboDerated<T>> {
    if received.len() != plan.e {
        return Err(Error::Framing(format!(
            "plan expects {} received values, got {}",
            plan.e,
            received.len()
        )));
    }
    let d = plan.d;
    let mut llr = [vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]];
    let mut ind = [vec![0u8; d], vec![0u8; d], vec![0u8; d]];
    for (&(s, i), &v) in plan.selection.iter().zip(received) {
        llr[s as usize][i as usize] += v;
        ind[s as usize][i as usize] = 1;
    }
    let [llr_s, llr_z, llr_zp] = llr;
    let [p_s, p_z, p_zp] = ind;
    Ok(TurboDerated {
        llr_s,
        llr_z,
        llr_zp,
        p_s,
        p_z,
        p_zp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{turbo_encode, QppTable};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn codeword(k: usize, tail: bool) -> CodewordStreams {
        let q = QppTable::lte_defaults().interleaver(k).unwrap();
        let bits: Vec<u8> = (0..k).map(|i| ((i * 7 + 3) % 5 < 2) as u8).collect();
        turbo_encode(&bits, &q, tail).unwrap()
    }

    #[test]
    fn subblock_interleaver_is_a_permutation_with_leading_fillers() {
        for d in [40, 44, 120, 124, 960] {
            for stream in [0, 2] {
                let (rows, pos) = subblock_positions(d, stream);
                assert_eq!(pos.len(), rows * 32);
                let real: HashSet<usize> = pos.iter().flatten().copied().collect();
                assert_eq!(real.len(), d);
                assert!(real.iter().all(|&i| i < d));
            }
        }
    }

    #[test]
    fn full_rate_selects_every_coded_bit_once() {
        let k = 120;
        let plan = RateMatchPlan::new(k, k, 3 * k).unwrap();
        let set: HashSet<_> = plan.selection().iter().collect();
        assert_eq!(set.len(), 3 * k);
    }

    #[test]
    fn half_rate_skips_exactly_k_bits() {
        let k = 240;
        let plan = RateMatchPlan::new(k, k, 2 * k).unwrap();
        let set: HashSet<_> = plan.selection().iter().collect();
        assert_eq!(set.len(), 2 * k);
        assert_eq!(3 * k - set.len(), k);
    }

    #[test]
    fn five_sixths_marks_1_8k_punctured() {
        let k = 120;
        let e = 144;
        let plan = RateMatchPlan::new(k, k, e).unwrap();
        let rx = vec![1.0f64; e];
        let dr = derate_turbo(&rx, &plan).unwrap();
        let punctured = dr.p_s.iter().chain(&dr.p_z).chain(&dr.p_zp).filter(|&&p| p == 0).count();
        assert_eq!(punctured * 10, 18 * k);
    }

    #[test]
    fn rate_above_one_is_unsupported() {
        assert!(matches!(RateMatchPlan::new(120, 120, 119), Err(Error::UnsupportedRate(_))));
    }

    #[test]
    fn selection_starts_at_k0_and_skips_fillers() {
        // K=40: R=2 rows, 24 leading fillers, k0 = 2R = 4. Buffer slot 4 is
        // permuted column 2 (original column 8), row 0: index 8 < 24, filler.
        // Slot 5 is row 1: index 8 + 32 - 24 = 16.
        let plan = RateMatchPlan::new(40, 40, 120).unwrap();
        assert_eq!(plan.subblock_rows(), 2);
        assert_eq!(plan.k0(), 4);
        assert_eq!(plan.selection()[0], (0, 16));
    }

    #[test]
    fn full_rate_derate_returns_the_streams() {
        let cw = codeword(120, false);
        let (tx, plan) = turbo_rate_match(&cw, 360).unwrap();
        let rx: Vec<f64> = tx.iter().map(|&b| 2.0 * f64::from(b) - 1.0).collect();
        let dr = derate_turbo(&rx, &plan).unwrap();
        let hard = |v: &[f64]| v.iter().map(|&x| u8::from(x > 0.0)).collect::<Vec<_>>();
        assert_eq!(hard(&dr.llr_s), cw.systematic);
        assert_eq!(hard(&dr.llr_z), cw.parity0);
        assert_eq!(hard(&dr.llr_zp), cw.parity1);
        assert!(dr.p_s.iter().chain(&dr.p_z).chain(&dr.p_zp).all(|&p| p == 1));
    }

    #[test]
    fn one_and_a_half_k_indicator_accounting() {
        let k = 120;
        let plan = RateMatchPlan::new(k, k, 180).unwrap();
        let dr = derate_turbo(&vec![0.0f32; 180], &plan).unwrap();
        let ones: usize = dr.p_s.iter().chain(&dr.p_z).chain(&dr.p_zp).map(|&p| p as usize).sum();
        assert_eq!(ones, 180);
        assert!(dr.llr_s.iter().chain(&dr.llr_z).chain(&dr.llr_zp).all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_bits_are_summed() {
        let k = 40;
        let plan = RateMatchPlan::new(k, k, 4 * k).unwrap();
        let dr = derate_turbo(&vec![1.0f64; 4 * k], &plan).unwrap();
        let total: f64 = dr.llr_s.iter().chain(&dr.llr_z).chain(&dr.llr_zp).sum();
        assert_eq!(total, (4 * k) as f64);
        assert!(dr.llr_s.iter().chain(&dr.llr_z).chain(&dr.llr_zp).any(|&v| v == 2.0));
    }

    #[test]
    fn tail_streams_are_rate_matched_too() {
        let cw = codeword(40, true);
        assert_eq!(cw.stream_len(), 44);
        let (tx, plan) = turbo_rate_match(&cw, 132).unwrap();
        assert_eq!(tx.len(), 132);
        assert_eq!(plan.stream_len(), 44);
    }

    #[test]
    fn length_mismatch_is_a_framing_error() {
        let plan = RateMatchPlan::new(40, 40, 100).unwrap();
        assert!(matches!(derate_turbo(&[0.0f64; 99], &plan), Err(Error::Framing(_))));
    }

    proptest! {
        #[test]
        fn derate_then_reselect_is_identity_on_transmitted_coordinates(
            k in prop::sample::select(vec![40usize, 120, 240]),
            num in 1u64..=30,
            seed in any::<u64>(),
        ) {
            // E between K and 3K (no repetition, so values are not summed).
            let e = k + (2 * k * num as usize) / 30;
            let plan = RateMatchPlan::new(k, k, e).unwrap();
            let rx: Vec<f64> = (0..e as u64).map(|i| (i.wrapping_mul(seed | 1) % 997) as f64 - 498.0).collect();
            let dr = derate_turbo(&rx, &plan).unwrap();
            for (v, p) in dr.llr_s.iter().zip(&dr.p_s) {
                prop_assert!(*p == 1 || *v == 0.0);
            }
            let again = plan.select(&[dr.llr_s, dr.llr_z, dr.llr_zp]).unwrap();
            prop_assert_eq!(again, rx);
        }
    }
}
