use super::trellis::Trellis;
use crate::error::{Error, Result};

/// Output of a feed-forward convolutional encoder: one stream per generator.
///
/// For the 802.11 code `streams[0]` is `z` (generator 133) and `streams[1]`
/// is `z'` (generator 171).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCodeword {
    pub streams: Vec<Vec<u8>>,
    /// Number of trailing steps driven by tail bits.
    pub tail_steps: usize,
}

impl ConvCodeword {
    pub fn steps(&self) -> usize {
        self.streams.first().map_or(0, Vec::len)
    }

    /// Per time step, stream 0 is emitted before stream 1 (z before z').
    pub fn serialize(&self) -> Vec<u8> {
        let n = self.steps();
        let mut out = Vec::with_capacity(n * self.streams.len());
        for t in 0..n {
            out.extend(self.streams.iter().map(|s| s[t]));
        }
        out
    }
}

pub(crate) fn check_binary(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::Domain(format!("non-binary value {} at index {i}", bits[i]))),
        None => Ok(()),
    }
}

/// Encodes `bits` starting from state 0.
///
/// With `terminate`, `memory` tail inputs drive the encoder back to state 0
/// (zeros for feed-forward codes).
pub fn conv_encode(bits: &[u8], trellis: &Trellis, terminate: bool) -> Result<ConvCodeword> {
    check_binary(bits)?;
    if trellis.is_recursive() {
        return Err(Error::Config(
            "conv_encode expects a feed-forward trellis; use the Turbo encoder for recursive codes".into(),
        ));
    }
    let tail_steps = if terminate { trellis.memory() } else { 0 };
    let n = bits.len() + tail_steps;
    let mut streams = vec![Vec::with_capacity(n); trellis.num_outputs()];
    let mut state = 0;
    let inputs = bits
        .iter()
        .copied()
        .chain(std::iter::repeat_n(0u8, tail_steps));
    for u in inputs {
        for (j, s) in streams.iter_mut().enumerate() {
            s.push(trellis.output_bit(state, u, j));
        }
        state = trellis.next_state(state, u);
    }
    debug_assert!(!terminate || state == 0);
    Ok(ConvCodeword {
        streams,
        tail_steps,
    })
}

/// Final encoder state after feeding `bits` from state 0.
pub fn final_state(bits: &[u8], trellis: &Trellis) -> usize {
    bits.iter().fold(0, |s, &u| trellis.next_state(s, u))
}
