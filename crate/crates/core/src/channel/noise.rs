use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Noise level for unit-energy symbols. `snr_db` is Es/N0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            snr_db,
            sigma2: 10f64.powf(-snr_db / 10.0),
        }
    }

    /// A noiseless channel (infinite SNR).
    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            sigma2: 0.0,
        }
    }
}

/// Es/N0 to Eb/N0 for a code of rate `rate` on an `m`-bit constellation.
pub fn esn0_to_ebn0(esn0_db: f64, rate: f64, bits_per_symbol: usize) -> f64 {
    esn0_db - 10.0 * (rate * bits_per_symbol as f64).log10()
}

pub fn ebn0_to_esn0(ebn0_db: f64, rate: f64, bits_per_symbol: usize) -> f64 {
    ebn0_db + 10.0 * (rate * bits_per_symbol as f64).log10()
}

pub(crate) fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, std: f64) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z * std)
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub(crate) fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex<T> {
    let s = (var / 2.0).sqrt();
    Complex::new(gaussian(rng, s), gaussian(rng, s))
}

/// Real AWGN: `y = x + n`, `n ~ N(0, sigma2)`.
pub fn awgn<T: Real, R: Rng + ?Sized>(symbols: &[T], noise: NoiseSpec, rng: &mut R) -> Vec<T> {
    if noise.sigma2 == 0.0 {
        return symbols.to_vec();
    }
    let std = noise.sigma2.sqrt();
    symbols.iter().map(|&x| x + gaussian::<T, _>(rng, std)).collect()
}

/// Complex AWGN with `sigma2 / 2` per real dimension.
pub fn awgn_complex<T: Real, R: Rng + ?Sized>(symbols: &[Complex<T>], noise: NoiseSpec, rng: &mut R) -> Vec<Complex<T>> {
    if noise.sigma2 == 0.0 {
        return symbols.to_vec();
    }
    symbols.iter().map(|&x| x + complex_gaussian::<T, _>(rng, noise.sigma2)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma2_from_snr() {
        assert!((NoiseSpec::from_snr_db(0.0).sigma2 - 1.0).abs() < 1e-15);
        assert!((NoiseSpec::from_snr_db(10.0).sigma2 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn noiseless_is_identity() {
        let x = [1.0f64, -1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(awgn(&x, NoiseSpec::noiseless(), &mut rng), x.to_vec());
    }

    #[test]
    fn empirical_variance_within_one_percent() {
        let n = 1_000_000;
        let noise = NoiseSpec::from_snr_db(3.0);
        let x = vec![0.0f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = awgn(&x, noise, &mut rng);
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var / noise.sigma2 - 1.0).abs() < 0.01, "{var} vs {}", noise.sigma2);
    }

    #[test]
    fn complex_noise_splits_variance() {
        let n = 400_000;
        let noise = NoiseSpec::from_snr_db(0.0);
        let x = vec![Complex::new(0.0f64, 0.0); n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = awgn_complex(&x, noise, &mut rng);
        let vr = y.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        let vi = y.iter().map(|v| v.im * v.im).sum::<f64>() / n as f64;
        assert!((vr - 0.5).abs() < 0.01 && (vi - 0.5).abs() < 0.01);
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let x = [0.5f32; 32];
        let a = awgn(&x, NoiseSpec::from_snr_db(1.0), &mut ChaCha8Rng::seed_from_u64(9));
        let b = awgn(&x, NoiseSpec::from_snr_db(1.0), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn ebn0_round_trip() {
        let e = esn0_to_ebn0(2.0, 0.5, 1);
        assert!((e - (2.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
        assert!((ebn0_to_esn0(e, 0.5, 1) - 2.0).abs() < 1e-12);
    }
}
