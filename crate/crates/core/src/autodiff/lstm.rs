//! Fused single-direction LSTM layer with back-propagation through time.
//!
//! Weights are packed gate-major with row blocks `[i, f, c~, o]`:
//! `w_ih: [4H, D_in]`, `w_hh: [4H, H]`, `b_ih, b_hh: [4H]`.

use super::la::{mm_nn, mm_nt, mm_tn, sigmoid};
use crate::scalar::Real;

/// Activations kept for the backward pass, indexed by processing step.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache<T> {
    /// Post-activation gates `[S][B][4H]`.
    gates: Vec<T>,
    /// Cell states `[S][B][H]`.
    cells: Vec<T>,
    /// `tanh` of the cell states `[S][B][H]`.
    cell_tanh: Vec<T>,
    /// Hidden states `[S][B][H]`.
    hidden: Vec<T>,
}

pub(crate) struct LstmDims {
    pub batch: usize,
    pub steps: usize,
    pub d_in: usize,
    pub hidden: usize,
    pub reverse: bool,
}

impl LstmDims {
    #[inline]
    fn time(&self, step: usize) -> usize {
        if self.reverse {
            self.steps - 1 - step
        } else {
            step
        }
    }
}

/// Runs the layer over `x: [B, S, D_in]`, returning `[B, S, H]` and the cache.
pub(crate) fn lstm_forward<T: Real>(
    d: &LstmDims,
    x: &[T],
    w_ih: &[T],
    w_hh: &[T],
    b_ih: &[T],
    b_hh: &[T],
) -> (Vec<T>, LstmCache<T>) {
    let (b, s, h) = (d.batch, d.steps, d.hidden);
    let g4 = 4 * h;
    let mut xproj = vec![T::zero(); b * s * g4];
    mm_nt(b * s, d.d_in, g4, x, w_ih, &mut xproj, false);
    for row in xproj.chunks_exact_mut(g4) {
        for ((v, &p), &q) in row.iter_mut().zip(b_ih).zip(b_hh) {
            *v += p + q;
        }
    }
    let mut gates = vec![T::zero(); s * b * g4];
    let mut cells = vec![T::zero(); s * b * h];
    let mut cell_tanh = vec![T::zero(); s * b * h];
    let mut hidden = vec![T::zero(); s * b * h];
    let mut out = vec![T::zero(); b * s * h];
    for step in 0..s {
        let t = d.time(step);
        let gs = &mut gates[step * b * g4..(step + 1) * b * g4];
        for bi in 0..b {
            gs[bi * g4..(bi + 1) * g4].copy_from_slice(&xproj[(bi * s + t) * g4..(bi * s + t + 1) * g4]);
        }
        if step > 0 {
            let hp = &hidden[(step - 1) * b * h..step * b * h];
            mm_nt(b, h, g4, hp, w_hh, gs, true);
        }
        for bi in 0..b {
            let g = &mut gs[bi * g4..(bi + 1) * g4];
            for j in 0..h {
                g[j] = sigmoid(g[j]);
                g[h + j] = sigmoid(g[h + j]);
                g[2 * h + j] = g[2 * h + j].tanh();
                g[3 * h + j] = sigmoid(g[3 * h + j]);
            }
            let base = (step * b + bi) * h;
            for j in 0..h {
                let c_prev = if step > 0 { cells[base - b * h + j] } else { T::zero() };
                let c = g[h + j] * c_prev + g[j] * g[2 * h + j];
                let tc = c.tanh();
                let hv = g[3 * h + j] * tc;
                cells[base + j] = c;
                cell_tanh[base + j] = tc;
                hidden[base + j] = hv;
                out[(bi * s + t) * h + j] = hv;
            }
        }
    }
    (
        out,
        LstmCache {
            gates,
            cells,
            cell_tanh,
            hidden,
        },
    )
}

pub(crate) struct LstmGrads<T> {
    pub dx: Vec<T>,
    pub dw_ih: Vec<T>,
    pub dw_hh: Vec<T>,
    pub db: Vec<T>,
}

/// Back-propagation through time. `dout: [B, S, H]`. The bias gradient is
/// shared by `b_ih` and `b_hh`.
pub(crate) fn lstm_backward<T: Real>(
    d: &LstmDims,
    cache: &LstmCache<T>,
    x: &[T],
    w_ih: &[T],
    w_hh: &[T],
    dout: &[T],
) -> LstmGrads<T> {
    let (b, s, h) = (d.batch, d.steps, d.hidden);
    let g4 = 4 * h;
    let one = T::one();
    let mut da = vec![T::zero(); s * b * g4];
    let mut dh_next = vec![T::zero(); b * h];
    let mut dc_next = vec![T::zero(); b * h];
    for step in (0..s).rev() {
        let t = d.time(step);
        for bi in 0..b {
            let g = &cache.gates[(step * b + bi) * g4..(step * b + bi + 1) * g4];
            let base = (step * b + bi) * h;
            let dst = &mut da[(step * b + bi) * g4..(step * b + bi + 1) * g4];
            for j in 0..h {
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cache.cell_tanh[base + j];
                let c_prev = if step > 0 { cache.cells[base - b * h + j] } else { T::zero() };
                let dh = dout[(bi * s + t) * h + j] + dh_next[bi * h + j];
                let d_o = dh * tc;
                let dc = dh * o * (one - tc * tc) + dc_next[bi * h + j];
                dc_next[bi * h + j] = dc * f;
                dst[j] = dc * gg * i * (one - i);
                dst[h + j] = dc * c_prev * f * (one - f);
                dst[2 * h + j] = dc * i * (one - gg * gg);
                dst[3 * h + j] = d_o * o * (one - o);
            }
        }
        if step > 0 {
            mm_nn(b, g4, h, &da[step * b * g4..(step + 1) * b * g4], w_hh, &mut dh_next, false);
        }
    }
    let mut dw_hh = vec![T::zero(); g4 * h];
    if s > 1 {
        // sum over steps 1..S of dA_s^T h_{s-1}
        mm_tn(g4, (s - 1) * b, h, &da[b * g4..], &cache.hidden[..(s - 1) * b * h], &mut dw_hh, false);
    }
    // reorder dA to batch-major rows (b, t)
    let mut da_bm = vec![T::zero(); b * s * g4];
    for step in 0..s {
        let t = d.time(step);
        for bi in 0..b {
            da_bm[(bi * s + t) * g4..(bi * s + t + 1) * g4]
                .copy_from_slice(&da[(step * b + bi) * g4..(step * b + bi + 1) * g4]);
        }
    }
    let mut dx = vec![T::zero(); b * s * d.d_in];
    mm_nn(b * s, g4, d.d_in, &da_bm, w_ih, &mut dx, false);
    let mut dw_ih = vec![T::zero(); g4 * d.d_in];
    mm_tn(g4, b * s, d.d_in, &da_bm, x, &mut dw_ih, false);
    let mut db = vec![T::zero(); g4];
    for row in da_bm.chunks_exact(g4) {
        for (a, &v) in db.iter_mut().zip(row) {
            *a += v;
        }
    }
    LstmGrads { dx, dw_ih, dw_hh, db }
}

/// Multiply-accumulates of one forward pass.
pub(crate) fn lstm_macs(d: &LstmDims) -> u64 {
    let h = d.hidden as u64;
    (d.batch * d.steps) as u64 * (4 * h * (d.d_in as u64 + h) + 3 * h)
}
