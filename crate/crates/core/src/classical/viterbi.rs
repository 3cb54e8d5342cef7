use crate::codec::Trellis;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Traceback depth of the reference decoder.
pub const DEFAULT_TRACEBACK: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViterbiConfig {
    pub traceback_depth: usize,
    /// The block ends with `memory` zero tail steps; the final traceback
    /// starts from state 0 and the tail bits are dropped.
    pub terminated: bool,
}

impl Default for ViterbiConfig {
    fn default() -> Self {
        Self {
            traceback_depth: DEFAULT_TRACEBACK,
            terminated: true,
        }
    }
}

/// Accumulated metrics and survivor decisions of one decoding run.
#[derive(Debug, Clone)]
pub struct PathMetrics<T> {
    pub metrics: Vec<T>,
    /// `survivors[t * S + s]` indexes the predecessor chosen into state `s`
    /// at step `t`.
    pub survivors: Vec<u8>,
    pub traceback_depth: usize,
}

/// Branch correlation `sum_j llr_j (2 c_j - 1)`.
#[inline]
fn branch_metric<T: Real>(llr: &[T], out: u32) -> T {
    let mut m = T::zero();
    for (j, &l) in llr.iter().enumerate() {
        if out >> j & 1 == 1 {
            m += l;
        } else {
            m -= l;
        }
    }
    m
}

/// One add-compare-select step followed by renormalization to a maximum of 0.
fn acs<T: Real>(row: &[T], trellis: &Trellis, metrics: &mut [T], next: &mut [T], survivors: &mut [u8]) {
    let mut best = T::neg_infinity();
    for (s, (slot, pick)) in next.iter_mut().zip(survivors.iter_mut()).enumerate() {
        let p = trellis.predecessors(s);
        let m0 = metrics[p[0].0] + branch_metric(row, trellis.output(p[0].0, p[0].1));
        let m1 = metrics[p[1].0] + branch_metric(row, trellis.output(p[1].0, p[1].1));
        let (m, k) = if m1 > m0 { (m1, 1) } else { (m0, 0) };
        *slot = m;
        *pick = k;
        best = best.max(m);
    }
    for (m, &v) in metrics.iter_mut().zip(next.iter()) {
        *m = v - best;
    }
}

/// Runs the add-compare-select recursion over `llr` (row-major, one row of
/// `num_outputs` LLRs per trellis step; positive favours bit 1, punctured
/// entries are zero).
pub fn viterbi_forward<T: Real>(llr: &[T], trellis: &Trellis, traceback_depth: usize) -> Result<PathMetrics<T>> {
    let n = trellis.num_outputs();
    if !llr.len().is_multiple_of(n) {
        return Err(Error::Framing(format!("{} LLRs do not form rows of {n}", llr.len())));
    }
    if traceback_depth == 0 {
        return Err(Error::Config("traceback depth must be positive".into()));
    }
    let steps = llr.len() / n;
    let ns = trellis.num_states();
    let mut metrics = vec![T::neg_infinity(); ns];
    metrics[0] = T::zero();
    let mut next = vec![T::zero(); ns];
    let mut survivors = vec![0u8; steps * ns];
    for t in 0..steps {
        acs(
            &llr[t * n..(t + 1) * n],
            trellis,
            &mut metrics,
            &mut next,
            &mut survivors[t * ns..(t + 1) * ns],
        );
    }
    Ok(PathMetrics {
        metrics,
        survivors,
        traceback_depth,
    })
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Soft-input Viterbi decoding with a sliding traceback window.
///
/// Once `traceback_depth` steps have been processed, every new step emits
/// the oldest undecided bit by tracing back from the currently best state.
/// The remaining bits are decided by a final traceback.
pub fn viterbi_decode<T: Real>(llr: &[T], trellis: &Trellis, config: ViterbiConfig) -> Result<Vec<u8>> {
    let n = trellis.num_outputs();
    if !llr.len().is_multiple_of(n) {
        return Err(Error::Framing(format!("{} LLRs do not form rows of {n}", llr.len())));
    }
    let d = config.traceback_depth;
    if d == 0 {
        return Err(Error::Config("traceback depth must be positive".into()));
    }
    let steps = llr.len() / n;
    let tail = if config.terminated { trellis.memory() } else { 0 };
    if steps < tail {
        return Err(Error::Framing(format!("{steps} steps cannot hold a {tail}-step tail")));
    }
    let ns = trellis.num_states();
    let mut metrics = vec![T::neg_infinity(); ns];
    metrics[0] = T::zero();
    let mut next = vec![T::zero(); ns];
    let mut survivors = vec![0u8; steps * ns];
    let mut decided = vec![0u8; steps];

    let trace = |survivors: &[u8], mut state: usize, from: usize, to: usize, out: &mut [u8], write_all: bool| {
        // walks back from step `from` down to step `to`, inclusive
        let mut t = from;
        loop {
            let (prev, u) = trellis.predecessors(state)[survivors[t * ns + state] as usize];
            if write_all || t == to {
                out[t] = u;
            }
            state = prev;
            if t == to {
                break;
            }
            t -= 1;
        }
    };

    for t in 0..steps {
        acs(
            &llr[t * n..(t + 1) * n],
            trellis,
            &mut metrics,
            &mut next,
            &mut survivors[t * ns..(t + 1) * ns],
        );
        if t + 1 >= d && t + 1 < steps {
            trace(&survivors, argmax(&metrics), t, t + 1 - d, &mut decided, false);
        }
    }
    if steps > 0 {
        let start = if config.terminated { 0 } else { argmax(&metrics) };
        let first_open = steps.saturating_sub(d);
        trace(&survivors, start, steps - 1, first_open, &mut decided, true);
    }
    decided.truncate(steps - tail);
    Ok(decided)
}
