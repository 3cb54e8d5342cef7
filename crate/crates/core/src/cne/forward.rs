use super::params::{CneParameters, CneVars, HeadVars};
use crate::autodiff::{BnBatchStats, BnMode, DiffArray, Tape, Tensor};
use crate::codec::QppInterleaver;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Batch statistics gathered during a training-mode forward pass, tagged
/// with the head they belong to.
pub type BnUpdates<T> = Vec<(usize, BnBatchStats<T>)>;

fn check_pair<T: Real>(tape: &Tape<T>, l_m: DiffArray, p: DiffArray, d_in: usize) -> Result<()> {
    let (a, b) = (tape.shape(l_m), tape.shape(p));
    if a.len() != 3 || a[2] != d_in || a != b {
        return Err(Error::Shape(format!(
            "CNE inputs must both be [B, S, {d_in}], got {a:?} and {b:?}"
        )));
    }
    Ok(())
}

/// Gated embedding `E_lp = (W_proj L + b_proj) * sigmoid(W_punc P + b_punc)`.
/// Without the puncture embedding the gate is dropped.
pub fn cne_embed<T: Real>(tape: &mut Tape<T>, head: &HeadVars, l_m: DiffArray, p: DiffArray) -> Result<DiffArray> {
    let e_l = tape.affine(l_m, head.w_proj, Some(head.b_proj))?;
    match head.punc {
        Some((w, b)) => {
            let pre = tape.affine(p, w, Some(b))?;
            let e_p = tape.sigmoid(pre);
            tape.mul(e_l, e_p)
        }
        None => Ok(e_l),
    }
}

/// One CNE evaluation: gated embedding, batch norm, bidirectional LSTM
/// stack and scalar head. `l_m`, `p`: `[B, S, 2]`; returns logits `[B, S, 1]`
/// (positive favours bit 1).
#[allow(clippy::too_many_arguments)]
pub fn cne_forward<T: Real>(
    tape: &mut Tape<T>,
    params: &CneParameters<T>,
    vars: &CneVars,
    core: usize,
    head: usize,
    l_m: DiffArray,
    p: DiffArray,
    mode: BnMode,
    updates: &mut BnUpdates<T>,
) -> Result<DiffArray> {
    check_pair(tape, l_m, p, params.config.d_in)?;
    let hv = vars.heads.get(head).ok_or_else(|| Error::Config(format!("no head {head}")))?;
    let stack = vars.cores.get(core).ok_or_else(|| Error::Config(format!("no core {core}")))?;
    let bn = &params.heads[head].bn;
    let e_lp = cne_embed(tape, hv, l_m, p)?;
    let (mut x, stats) = tape.batchnorm(
        e_lp,
        hv.gamma,
        hv.beta,
        mode,
        (&bn.running_mean, &bn.running_var),
        bn.eps,
    )?;
    if let Some(s) = stats {
        updates.push((head, s));
    }
    for layer in stack {
        let [f, b] = layer;
        let hf = tape.lstm(x, f.w_ih, f.w_hh, f.b_ih, f.b_hh, false)?;
        let hb = tape.lstm(x, b.w_ih, b.w_hh, b.b_ih, b.b_hh, true)?;
        x = tape.concat(&[hf, hb])?;
    }
    tape.affine(x, hv.w_out, Some(hv.b_out))
}

/// De-rate-matched Turbo inputs, each `[B, K]`.
#[derive(Debug, Clone)]
pub struct TurboInputs<T> {
    pub llr_s: Tensor<T>,
    pub llr_z: Tensor<T>,
    pub llr_zp: Tensor<T>,
    pub p_s: Tensor<T>,
    pub p_z: Tensor<T>,
    pub p_zp: Tensor<T>,
}

impl<T: Real> TurboInputs<T> {
    fn dims(&self) -> Result<(usize, usize)> {
        let s = self.llr_s.shape();
        let ok = s.len() == 2
            && [&self.llr_z, &self.llr_zp, &self.p_s, &self.p_z, &self.p_zp]
                .iter()
                .all(|t| t.shape() == s);
        if !ok {
            return Err(Error::Shape("Turbo inputs must all be [B, K]".into()));
        }
        Ok((s[0], s[1]))
    }
}

fn as_column<T: Real>(tape: &mut Tape<T>, t: &Tensor<T>) -> Result<DiffArray> {
    let s = t.shape();
    Ok(tape.constant(t.clone().reshape(&[s[0], s[1], 1])?))
}

/// Iterative Turbo decoding with two CNE calls per iteration.
///
/// Per iteration: `l0 = CNE([llr_s + ext, llr_z], [p_s, p_z])`,
/// `int0 = pi(l0 - ext)`, `l1 = CNE([int0, llr_z'], [pi(p_s), p_z'])`,
/// `ext = pi^-1(l1 - int0)`. The prior starts at zero and the output is
/// `pi^-1(l1)` of the last iteration. Returns `[B, K, 1]`.
pub fn cne_turbo_forward<T: Real>(
    tape: &mut Tape<T>,
    params: &CneParameters<T>,
    vars: &CneVars,
    inputs: &TurboInputs<T>,
    interleaver: &QppInterleaver,
    mode: BnMode,
    updates: &mut BnUpdates<T>,
) -> Result<DiffArray> {
    let calls = vec![vars; 2 * params.config.n_iter];
    cne_turbo_forward_unrolled(tape, params, &calls, inputs, interleaver, mode, updates)
}

/// [`cne_turbo_forward`] with explicit handles for each of the `2 N_iter`
/// calls (call `2 t + j` is CNE `j` of iteration `t`).
pub fn cne_turbo_forward_unrolled<T: Real>(
    tape: &mut Tape<T>,
    params: &CneParameters<T>,
    calls: &[&CneVars],
    inputs: &TurboInputs<T>,
    interleaver: &QppInterleaver,
    mode: BnMode,
    updates: &mut BnUpdates<T>,
) -> Result<DiffArray> {
    let cfg = &params.config;
    let (b, k) = inputs.dims()?;
    if interleaver.len() != k {
        return Err(Error::Shape(format!(
            "interleaver length {} does not match block length {k}",
            interleaver.len()
        )));
    }
    if calls.len() != 2 * cfg.n_iter {
        return Err(Error::Config(format!("{} call handles for {} iterations", calls.len(), cfg.n_iter)));
    }
    let pi = interleaver.table();
    let pi_inv = interleaver.inverse_table();
    let llr_s = as_column(tape, &inputs.llr_s)?;
    let llr_z = as_column(tape, &inputs.llr_z)?;
    let llr_zp = as_column(tape, &inputs.llr_zp)?;
    let p_s = as_column(tape, &inputs.p_s)?;
    let p_z = as_column(tape, &inputs.p_z)?;
    let p_zp = as_column(tape, &inputs.p_zp)?;
    let p_s_int = tape.gather_seq(p_s, pi)?;
    let p0 = tape.concat(&[p_s, p_z])?;
    let p1 = tape.concat(&[p_s_int, p_zp])?;
    let mut ext = tape.constant(Tensor::zeros(&[b, k, 1]));
    let mut last = None;
    for it in 0..cfg.n_iter {
        let (c0, h0) = cfg.slots(it, 0);
        let (c1, h1) = cfg.slots(it, 1);
        let sys = tape.add(llr_s, ext)?;
        let in0 = tape.concat(&[sys, llr_z])?;
        let l0 = cne_forward(tape, params, calls[2 * it], c0, h0, in0, p0, mode, updates)?;
        let d0 = tape.sub(l0, ext)?;
        let int0 = tape.gather_seq(d0, pi)?;
        let in1 = tape.concat(&[int0, llr_zp])?;
        let l1 = cne_forward(tape, params, calls[2 * it + 1], c1, h1, in1, p1, mode, updates)?;
        let d1 = tape.sub(l1, int0)?;
        ext = tape.gather_seq(d1, pi_inv)?;
        last = Some(l1);
    }
    tape.gather_seq(last.expect("n_iter >= 1"), pi_inv)
}

/// Inference-mode logits of a convolutional CNE, `[B, S]` flattened.
pub fn infer_conv<T: Real>(params: &CneParameters<T>, l_m: &Tensor<T>, p: &Tensor<T>) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let x = tape.constant(l_m.clone());
    let q = tape.constant(p.clone());
    let out = cne_forward(&mut tape, params, &vars, 0, 0, x, q, BnMode::Eval, &mut Vec::new())?;
    Ok(tape.value(out).data().to_vec())
}

/// Inference-mode Turbo output LLRs, `[B, K]` flattened.
pub fn infer_turbo<T: Real>(
    params: &CneParameters<T>,
    inputs: &TurboInputs<T>,
    interleaver: &QppInterleaver,
) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let out = cne_turbo_forward(&mut tape, params, &vars, inputs, interleaver, BnMode::Eval, &mut Vec::new())?;
    Ok(tape.value(out).data().to_vec())
}
