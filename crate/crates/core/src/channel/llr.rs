use num_complex::Complex;

use super::constellation::Constellation;
use crate::scalar::Real;

/// How soft bits are computed from detected symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemapMode<T> {
    /// Real BPSK over AWGN with per-dimension variance `sigma2`:
    /// `llr = 2 Re(y) / sigma2`.
    BpskExact { sigma2: T },
    /// Squared-distance max-log with complex noise variance `sigma2`.
    MaxLog { sigma2: T },
    /// Unsquared distance difference, unscaled.
    Euclidean,
}

/// Per-bit LLRs, positive favouring bit 1.
pub fn demap_llr<T: Real>(symbols: &[Complex<T>], constellation: &Constellation<T>, mode: DemapMode<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    match mode {
        DemapMode::BpskExact { sigma2 } => {
            let k = T::lit(2.0) / sigma2;
            out.extend(symbols.iter().map(|y| k * y.re));
        }
        DemapMode::MaxLog { sigma2 } => {
            for &y in symbols {
                constellation.maxlog_llrs(y, sigma2, &mut out);
            }
        }
        DemapMode::Euclidean => {
            for &y in symbols {
                constellation.euclidean_llrs(y, &mut out);
            }
        }
    }
    out
}

/// Real-valued BPSK LLRs `2 y / sigma2`.
pub fn bpsk_llr<T: Real>(received: &[T], sigma2: T) -> Vec<T> {
    let k = T::lit(2.0) / sigma2;
    received.iter().map(|&y| k * y).collect()
}

pub const NORMALIZE_EPS: f64 = 1e-6;

/// Standardizes a block of LLRs while keeping each sign:
/// `|(llr - mu) / sqrt(var + eps)| * sign(llr)`, with `mu`, `var` the
/// population mean and variance over the whole block.
pub fn normalize_llr<T: Real>(llr: &[T], eps: T) -> Vec<T> {
    if llr.is_empty() {
        return Vec::new();
    }
    let n = T::lit(llr.len() as f64);
    let mu = llr.iter().copied().sum::<T>() / n;
    let var = llr.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / n;
    let inv = (var + eps).sqrt().recip();
    llr.iter()
        .map(|&v| {
            let sign = if v > T::zero() {
                T::one()
            } else if v < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            ((v - mu) * inv).abs() * sign
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Modulation;
    use proptest::prelude::*;

    #[test]
    fn bpsk_plus_one_at_unit_variance_is_plus_two() {
        assert_eq!(bpsk_llr(&[1.0f64], 1.0), vec![2.0]);
        let c = Constellation::<f64>::new(Modulation::Bpsk);
        let l = demap_llr(&[Complex::new(1.0, 0.3)], &c, DemapMode::BpskExact { sigma2: 1.0 });
        assert_eq!(l, vec![2.0]);
    }

    #[test]
    fn euclidean_mode_is_distance_difference() {
        let c = Constellation::<f64>::new(Modulation::Bpsk);
        let l = demap_llr(&[Complex::new(0.5, 0.0)], &c, DemapMode::Euclidean);
        assert!((l[0] - (1.5 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn standardized_input_keeps_magnitudes() {
        let x = [1.0f64, -1.0, 1.0, -1.0];
        let y = normalize_llr(&x, 0.0);
        assert_eq!(y, x.to_vec());
    }

    #[test]
    fn constant_input_collapses_to_zero() {
        let y = normalize_llr(&[3.0f64; 8], NORMALIZE_EPS);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn normalization_preserves_signs(x in proptest::collection::vec(-50.0f64..50.0, 1..100)) {
            let y = normalize_llr(&x, NORMALIZE_EPS);
            for (a, b) in x.iter().zip(&y) {
                prop_assert!(a.signum() == b.signum() || *b == 0.0);
                prop_assert!(!(*a > 0.0 && *b < 0.0) && !(*a < 0.0 && *b > 0.0));
            }
        }
    }
}
