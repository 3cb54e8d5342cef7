use super::conv::check_binary;
use super::qpp::QppInterleaver;
use super::trellis::Trellis;
use crate::error::{Error, Result};

/// Trellis-termination bits of both constituent encoders.
///
/// `sys0`/`par0` belong to the first encoder, `sys1`/`par1` to the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurboTail<T> {
    pub sys0: [T; 3],
    pub par0: [T; 3],
    pub sys1: [T; 3],
    pub par1: [T; 3],
}

impl<T: Copy> TurboTail<T> {
    /// Multiplexes the twelve tail values into the last four positions of
    /// the three output streams, LTE style:
    ///
    /// ```text
    /// d0: x_K   z_K+1 x'_K   z'_K+1
    /// d1: z_K   x_K+2 z'_K   x'_K+2
    /// d2: x_K+1 z_K+2 x'_K+1 z'_K+2
    /// ```
    pub fn to_streams(&self) -> [[T; 4]; 3] {
        let (x, z, xp, zp) = (self.sys0, self.par0, self.sys1, self.par1);
        [
            [x[0], z[1], xp[0], zp[1]],
            [z[0], x[2], zp[0], xp[2]],
            [x[1], z[2], xp[1], zp[2]],
        ]
    }

    pub fn from_streams(d: [[T; 4]; 3]) -> Self {
        Self {
            sys0: [d[0][0], d[2][0], d[1][1]],
            par0: [d[1][0], d[0][1], d[2][1]],
            sys1: [d[0][2], d[2][2], d[1][3]],
            par1: [d[1][2], d[0][3], d[2][3]],
        }
    }
}

/// The three mother-rate streams of a PCCC codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordStreams {
    pub systematic: Vec<u8>,
    pub parity0: Vec<u8>,
    pub parity1: Vec<u8>,
    pub tail: Option<TurboTail<u8>>,
}

impl CodewordStreams {
    pub fn k(&self) -> usize {
        self.systematic.len()
    }

    /// Stream length seen by the rate matcher: `K`, or `K + 4` with tail.
    pub fn stream_len(&self) -> usize {
        self.k() + if self.tail.is_some() { 4 } else { 0 }
    }

    /// The three rate-matcher input streams `d0, d1, d2`.
    pub fn rate_matcher_streams(&self) -> [Vec<u8>; 3] {
        let mut d = [
            self.systematic.clone(),
            self.parity0.clone(),
            self.parity1.clone(),
        ];
        if let Some(tail) = &self.tail {
            for (s, t) in d.iter_mut().zip(tail.to_streams()) {
                s.extend(t);
            }
        }
        d
    }
}

/// Runs a recursive encoder over `bits`; returns the parity stream and the
/// final state. Only the first generator of the trellis is used.
pub fn rsc_encode(bits: &[u8], trellis: &Trellis) -> (Vec<u8>, usize) {
    let mut state = 0;
    let parity = bits
        .iter()
        .map(|&u| {
            let p = trellis.output_bit(state, u, 0);
            state = trellis.next_state(state, u);
            p
        })
        .collect();
    (parity, state)
}

fn terminate(trellis: &Trellis, mut state: usize) -> ([u8; 3], [u8; 3]) {
    let mut sys = [0u8; 3];
    let mut par = [0u8; 3];
    for i in 0..3 {
        let u = trellis.termination_input(state);
        sys[i] = u;
        par[i] = trellis.output_bit(state, u, 0);
        state = trellis.next_state(state, u);
    }
    debug_assert_eq!(state, 0);
    (sys, par)
}

/// Parallel-concatenated encoder with two copies of the LTE constituent.
pub fn turbo_encode(
    bits: &[u8],
    interleaver: &QppInterleaver,
    terminate_trellis: bool,
) -> Result<CodewordStreams> {
    check_binary(bits)?;
    if interleaver.len() != bits.len() {
        return Err(Error::Config(format!(
            "block of {} bits does not match interleaver length {}",
            bits.len(),
            interleaver.len()
        )));
    }
    let trellis = Trellis::lte_turbo_constituent();
    let (parity0, s0) = rsc_encode(bits, &trellis);
    let interleaved = interleaver.interleave(bits)?;
    let (parity1, s1) = rsc_encode(&interleaved, &trellis);
    let tail = terminate_trellis.then(|| {
        let (sys0, par0) = terminate(&trellis, s0);
        let (sys1, par1) = terminate(&trellis, s1);
        TurboTail {
            sys0,
            par0,
            sys1,
            par1,
        }
    });
    Ok(CodewordStreams {
        systematic: bits.to_vec(),
        parity0,
        parity1,
        tail,
    })
}
