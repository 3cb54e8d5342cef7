use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    #[serde(rename = "16qam", alias = "qam16")]
    Qam16,
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        })
    }
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }
}

/// Gray-labelled constellation with unit average energy.
///
/// Labels are read MSB-first: bit 0 of a symbol is the first bit of its
/// group in the input stream. BPSK maps `0 -> -1` and `1 -> +1`.
#[derive(Debug, Clone)]
pub struct Constellation<T> {
    modulation: Modulation,
    points: Vec<Complex<T>>,
}

/// 2-bit Gray amplitude: (sign bit, magnitude bit) -> {-3,-1,+1,+3}.
fn pam4(sign: usize, inner: usize) -> f64 {
    (2.0 * sign as f64 - 1.0) * (3.0 - 2.0 * inner as f64)
}

impl<T: Real> Constellation<T> {
    pub fn new(modulation: Modulation) -> Self {
        let points = match modulation {
            Modulation::Bpsk => vec![
                Complex::new(-T::one(), T::zero()),
                Complex::new(T::one(), T::zero()),
            ],
            Modulation::Qpsk => {
                let a = T::lit(std::f64::consts::FRAC_1_SQRT_2);
                (0..4)
                    .map(|l| {
                        let re = if l >> 1 & 1 == 1 { a } else { -a };
                        let im = if l & 1 == 1 { a } else { -a };
                        Complex::new(re, im)
                    })
                    .collect()
            }
            Modulation::Qam16 => {
                let s = 1.0 / 10f64.sqrt();
                (0..16usize)
                    .map(|l| {
                        let b = |i: usize| l >> (3 - i) & 1;
                        // I from bits (0, 2), Q from bits (1, 3).
                        Complex::new(T::lit(pam4(b(0), b(2)) * s), T::lit(pam4(b(1), b(3)) * s))
                    })
                    .collect()
            }
        };
        Self { modulation, points }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }
    pub fn order(&self) -> usize {
        self.points.len()
    }
    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }
    /// Points indexed by label.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    /// Bit `i` (MSB-first) of `label`.
    pub fn label_bit(&self, label: usize, i: usize) -> u8 {
        (label >> (self.bits_per_symbol() - 1 - i) & 1) as u8
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        let m = self.bits_per_symbol();
        if !bits.len().is_multiple_of(m) {
            return Err(Error::Framing(format!(
                "{} bits is not a multiple of {m} bits per symbol",
                bits.len()
            )));
        }
        bits.chunks(m)
            .map(|g| {
                let mut label = 0;
                for &b in g {
                    if b > 1 {
                        return Err(Error::Domain(format!("non-binary value {b}")));
                    }
                    label = label << 1 | b as usize;
                }
                Ok(self.points[label])
            })
            .collect()
    }

    /// Max-log LLRs, positive favouring bit 1:
    /// `(min_{x in X0} |y-x|^2 - min_{x in X1} |y-x|^2) / sigma2`.
    pub fn maxlog_llrs(&self, y: Complex<T>, sigma2: T, out: &mut Vec<T>) {
        self.min_distance_llrs(y, out, |d| d.norm_sqr() / sigma2);
    }

    /// Unsquared, unscaled distance difference
    /// `min_{x in X0} |y-x| - min_{x in X1} |y-x|`.
    pub fn euclidean_llrs(&self, y: Complex<T>, out: &mut Vec<T>) {
        self.min_distance_llrs(y, out, |d| d.norm());
    }

    fn min_distance_llrs(&self, y: Complex<T>, out: &mut Vec<T>, metric: impl Fn(Complex<T>) -> T) {
        let m = self.bits_per_symbol();
        let dist: Vec<T> = self.points.iter().map(|&x| metric(y - x)).collect();
        for i in 0..m {
            let mut best = [T::infinity(); 2];
            for (label, &d) in dist.iter().enumerate() {
                let b = self.label_bit(label, i) as usize;
                best[b] = best[b].min(d);
            }
            out.push(best[0] - best[1]);
        }
    }
}
