use super::siso::maxlog_siso;
use crate::codec::{QppInterleaver, Trellis, TurboTail};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Iteration count of the reference decoder.
pub const DEFAULT_TURBO_ITERATIONS: usize = 6;

#[derive(Debug, Clone)]
pub struct TurboDecoded<T> {
    pub bits: Vec<u8>,
    /// Deinterleaved a-posteriori LLRs of the second SISO after each
    /// iteration.
    pub app_per_iteration: Vec<Vec<T>>,
}

/// Iterative max-log-MAP decoding of the LTE PCCC.
///
/// Inputs are de-rate-matched channel LLRs of length `K` (zeros at punctured
/// positions). With `tail`, both constituent trellises are run over the
/// three termination steps and pinned to state 0.
pub fn turbo_decode_classical<T: Real>(
    llr_s: &[T],
    llr_z: &[T],
    llr_zp: &[T],
    interleaver: &QppInterleaver,
    n_iter: usize,
    tail: Option<&TurboTail<T>>,
) -> Result<TurboDecoded<T>> {
    let k = interleaver.len();
    if llr_s.len() != k || llr_z.len() != k || llr_zp.len() != k {
        return Err(Error::Shape(format!(
            "turbo decoder for K={k} got streams of {} / {} / {}",
            llr_s.len(),
            llr_z.len(),
            llr_zp.len()
        )));
    }
    if n_iter == 0 {
        return Err(Error::Config("at least one iteration is required".into()));
    }
    let trellis = Trellis::lte_turbo_constituent();
    let extend = |v: &[T], t: Option<[T; 3]>| {
        let mut out = v.to_vec();
        if let Some(t) = t {
            out.extend(t);
        }
        out
    };
    let terminated = tail.is_some();
    let sys0 = extend(llr_s, tail.map(|t| t.sys0));
    let par0 = extend(llr_z, tail.map(|t| t.par0));
    let sys1 = extend(&interleaver.interleave(llr_s)?, tail.map(|t| t.sys1));
    let par1 = extend(llr_zp, tail.map(|t| t.par1));
    let zero_tail = terminated.then_some([T::zero(); 3]);

    let mut ext1_deint = vec![T::zero(); k];
    let mut app_per_iteration = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let b0 = maxlog_siso(&sys0, &par0, &extend(&ext1_deint, zero_tail), &trellis, terminated)?;
        let prior1 = interleaver.interleave(&b0.llr_ext[..k])?;
        let b1 = maxlog_siso(&sys1, &par1, &extend(&prior1, zero_tail), &trellis, terminated)?;
        ext1_deint = interleaver.deinterleave(&b1.llr_ext[..k])?;
        app_per_iteration.push(interleaver.deinterleave(&b1.llr_app[..k])?);
    }
    let bits = app_per_iteration
        .last()
        .expect("n_iter > 0")
        .iter()
        .map(|&l| (l > T::zero()) as u8)
        .collect();
    Ok(TurboDecoded {
        bits,
        app_per_iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::siso::tests::exhaustive_app;
    use crate::codec::{turbo_encode, QppTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bpsk(bits: &[u8], mag: f64) -> Vec<f64> {
        bits.iter().map(|&b| if b == 1 { mag } else { -mag }).collect()
    }

    #[test]
    fn noiseless_rate_third_decodes_in_one_iteration() {
        let q = QppTable::lte_defaults().interleaver(120).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for tail in [false, true] {
            let bits: Vec<u8> = (0..120).map(|_| rng.random_range(0..2)).collect();
            let cw = turbo_encode(&bits, &q, tail).unwrap();
            let t = cw.tail.map(|t| TurboTail {
                sys0: t.sys0.map(|b| if b == 1 { 4.0 } else { -4.0 }),
                par0: t.par0.map(|b| if b == 1 { 4.0 } else { -4.0 }),
                sys1: t.sys1.map(|b| if b == 1 { 4.0 } else { -4.0 }),
                par1: t.par1.map(|b| if b == 1 { 4.0 } else { -4.0 }),
            });
            let out = turbo_decode_classical(
                &bpsk(&cw.systematic, 4.0),
                &bpsk(&cw.parity0, 4.0),
                &bpsk(&cw.parity1, 4.0),
                &q,
                1,
                t.as_ref(),
            )
            .unwrap();
            assert_eq!(out.bits, bits);
        }
    }

    #[test]
    fn equals_chained_exhaustive_sisos() {
        let q = QppInterleaver::new(8, 3, 4).unwrap();
        let t = Trellis::lte_turbo_constituent();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..10 {
            let mut v = || (0..8).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
            let (s, z, zp) = (v(), v(), v());
            let out = turbo_decode_classical(&s, &z, &zp, &q, 2, None).unwrap();

            let s1 = q.interleave(&s).unwrap();
            let mut ext1 = vec![0.0; 8];
            for it in 0..2 {
                let app0 = exhaustive_app(&s, &z, &ext1, &t, 0);
                let ext0: Vec<f64> = (0..8).map(|i| app0[i] - ext1[i] - s[i]).collect();
                let prior1 = q.interleave(&ext0).unwrap();
                let app1 = exhaustive_app(&s1, &zp, &prior1, &t, 0);
                let e1: Vec<f64> = (0..8).map(|i| app1[i] - prior1[i] - s1[i]).collect();
                ext1 = q.deinterleave(&e1).unwrap();
                let want = q.deinterleave(&app1).unwrap();
                for (g, w) in out.app_per_iteration[it].iter().zip(&want) {
                    assert!((g - w).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn wrong_stream_length_is_rejected() {
        let q = QppInterleaver::new(8, 3, 4).unwrap();
        assert!(turbo_decode_classical(&[0.0f32; 8], &[0.0; 7], &[0.0; 8], &q, 1, None).is_err());
    }
}
