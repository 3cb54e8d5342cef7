use crate::codec::Trellis;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Forward/backward metrics and output LLRs of one max-log-MAP pass.
#[derive(Debug, Clone)]
pub struct SisoBeliefs<T> {
    /// `alpha[t * S + s]` for `t in 0..=steps`.
    pub alpha: Vec<T>,
    /// `beta[t * S + s]` for `t in 0..=steps`.
    pub beta: Vec<T>,
    pub llr_app: Vec<T>,
    pub llr_ext: Vec<T>,
}

#[inline]
fn signed<T: Real>(bit: u32, v: T) -> T {
    if bit == 1 {
        v
    } else {
        -v
    }
}

/// Max-log-MAP over a rate-1/2 systematic recursive trellis.
///
/// Branch metric `(u~ (Ls + La) + c~ Lp) / 2` with `x~ = 2x - 1`. The
/// encoder starts in state 0; the final state is pinned to 0 when
/// `terminated`, uniform otherwise. Extrinsic output is
/// `app - prior - sys`, unscaled.
pub fn maxlog_siso<T: Real>(
    llr_sys: &[T],
    llr_par: &[T],
    llr_prior: &[T],
    trellis: &Trellis,
    terminated: bool,
) -> Result<SisoBeliefs<T>> {
    let steps = llr_sys.len();
    if llr_par.len() != steps || llr_prior.len() != steps {
        return Err(Error::Shape(format!(
            "SISO inputs differ in length: {} / {} / {}",
            steps,
            llr_par.len(),
            llr_prior.len()
        )));
    }
    let ns = trellis.num_states();
    let half = T::lit(0.5);
    let gamma = |t: usize, s: usize, u: u8| {
        half * (signed(u as u32, llr_sys[t] + llr_prior[t]) + signed(trellis.output(s, u) & 1, llr_par[t]))
    };

    let ninf = T::neg_infinity();
    let mut alpha = vec![ninf; (steps + 1) * ns];
    alpha[0] = T::zero();
    for t in 0..steps {
        let (cur, nxt) = alpha[t * ns..(t + 2) * ns].split_at_mut(ns);
        for s in 0..ns {
            if cur[s] == ninf {
                continue;
            }
            for u in 0..2u8 {
                let n = trellis.next_state(s, u);
                nxt[n] = nxt[n].max(cur[s] + gamma(t, s, u));
            }
        }
        let m = nxt.iter().copied().fold(ninf, T::max);
        nxt.iter_mut().for_each(|v| *v -= m);
    }

    let mut beta = vec![ninf; (steps + 1) * ns];
    if terminated {
        beta[steps * ns] = T::zero();
    } else {
        beta[steps * ns..].iter_mut().for_each(|v| *v = T::zero());
    }
    for t in (0..steps).rev() {
        let (cur, nxt) = beta[t * ns..(t + 2) * ns].split_at_mut(ns);
        for s in 0..ns {
            let mut b = ninf;
            for u in 0..2u8 {
                b = b.max(nxt[trellis.next_state(s, u)] + gamma(t, s, u));
            }
            cur[s] = b;
        }
        let m = cur.iter().copied().fold(ninf, T::max);
        cur.iter_mut().for_each(|v| *v -= m);
    }

    let mut llr_app = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut best = [ninf; 2];
        for s in 0..ns {
            let a = alpha[t * ns + s];
            if a == ninf {
                continue;
            }
            for u in 0..2u8 {
                let v = a + gamma(t, s, u) + beta[(t + 1) * ns + trellis.next_state(s, u)];
                best[u as usize] = best[u as usize].max(v);
            }
        }
        llr_app.push(best[1] - best[0]);
    }
    let llr_ext = llr_app
        .iter()
        .zip(llr_prior)
        .zip(llr_sys)
        .map(|((&a, &p), &s)| a - p - s)
        .collect();
    Ok(SisoBeliefs {
        alpha,
        beta,
        llr_app,
        llr_ext,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::codec::rsc_encode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive max-log oracle: enumerates every input sequence (plus the
    /// forced tail when `tail > 0`) and takes the signed best-metric
    /// difference per position.
    pub(crate) fn exhaustive_app(sys: &[f64], par: &[f64], prior: &[f64], trellis: &Trellis, tail: usize) -> Vec<f64> {
        let k = sys.len() - tail;
        let mut best = vec![[f64::NEG_INFINITY; 2]; sys.len()];
        for w in 0..1u32 << k {
            let mut bits: Vec<u8> = (0..k).map(|i| (w >> i & 1) as u8).collect();
            let (_, mut state) = rsc_encode(&bits, trellis);
            for _ in 0..tail {
                let u = trellis.termination_input(state);
                bits.push(u);
                state = trellis.next_state(state, u);
            }
            let (p, _) = rsc_encode(&bits, trellis);
            let m: f64 = (0..bits.len())
                .map(|t| {
                    let u = 2.0 * bits[t] as f64 - 1.0;
                    let c = 2.0 * p[t] as f64 - 1.0;
                    0.5 * (u * (sys[t] + prior[t]) + c * par[t])
                })
                .sum();
            for (t, &b) in bits.iter().enumerate() {
                let slot = &mut best[t][b as usize];
                *slot = slot.max(m);
            }
        }
        best.iter().map(|b| b[1] - b[0]).collect()
    }

    fn random_inputs(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut v = || (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        (v(), v(), v())
    }

    #[test]
    fn large_noiseless_llrs_recover_bits() {
        let t = Trellis::lte_turbo_constituent();
        let bits: Vec<u8> = (0..40).map(|i| (i * 5 % 7 < 3) as u8).collect();
        let (par, _) = rsc_encode(&bits, &t);
        let sys: Vec<f64> = bits.iter().map(|&b| if b == 1 { 10.0 } else { -10.0 }).collect();
        let p: Vec<f64> = par.iter().map(|&b| if b == 1 { 10.0 } else { -10.0 }).collect();
        let out = maxlog_siso(&sys, &p, &vec![0.0; 40], &t, false).unwrap();
        for (l, &b) in out.llr_app.iter().zip(&bits) {
            assert_eq!(*l > 0.0, b == 1);
        }
    }

    #[test]
    fn matches_exhaustive_oracle_unterminated() {
        let t = Trellis::lte_turbo_constituent();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let (s, p, a) = random_inputs(&mut rng, 8);
            let got = maxlog_siso(&s, &p, &a, &t, false).unwrap();
            let want = exhaustive_app(&s, &p, &a, &t, 0);
            for (g, w) in got.llr_app.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn matches_exhaustive_oracle_terminated() {
        let t = Trellis::lte_turbo_constituent();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let (s, p, mut a) = random_inputs(&mut rng, 11);
            a[8..].iter_mut().for_each(|v| *v = 0.0);
            let got = maxlog_siso(&s, &p, &a, &t, true).unwrap();
            let want = exhaustive_app(&s, &p, &a, &t, 3);
            for (g, w) in got.llr_app.iter().zip(&want).take(8) {
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn doubling_inputs_doubles_app_exactly() {
        let t = Trellis::lte_turbo_constituent();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (s, p, a) = random_inputs(&mut rng, 64);
        let x = maxlog_siso(&s, &p, &a, &t, false).unwrap();
        let d = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
        let y = maxlog_siso(&d(&s), &d(&p), &d(&a), &t, false).unwrap();
        for (u, v) in x.llr_app.iter().zip(&y.llr_app) {
            assert_eq!(2.0 * u, *v);
        }
    }

    #[test]
    fn extrinsic_excludes_prior_and_systematic() {
        let t = Trellis::lte_turbo_constituent();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let (s, p, a) = random_inputs(&mut rng, 16);
        let x = maxlog_siso(&s, &p, &a, &t, false).unwrap();
        for i in 0..16 {
            assert!((x.llr_ext[i] - (x.llr_app[i] - a[i] - s[i])).abs() < 1e-12);
        }
        assert!(x.alpha.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let t = Trellis::lte_turbo_constituent();
        assert!(maxlog_siso(&[0.0f32; 4], &[0.0; 3], &[0.0; 4], &t, false).is_err());
    }
}
