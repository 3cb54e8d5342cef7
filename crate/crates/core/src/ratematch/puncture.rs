use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rate::CodeRate;
use crate::scalar::Real;

/// Periodic keep/steal mask over the encoder output streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PuncturingPattern {
    name: String,
    mother_rate: CodeRate,
    /// `keep[stream][phase]`
    keep: Vec<Vec<bool>>,
}

/// Per-position non-punctured flags, `rows x streams`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctureIndicator {
    pub rows: usize,
    pub streams: usize,
    pub flags: Vec<u8>,
}

impl PunctureIndicator {
    pub fn get(&self, row: usize, stream: usize) -> u8 {
        self.flags[row * self.streams + stream]
    }
}

/// De-punctured LLRs, `rows x streams`, row-major, zeros at stolen positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrMatrix<T> {
    pub rows: usize,
    pub streams: usize,
    pub values: Vec<T>,
}

impl<T: Copy> LlrMatrix<T> {
    pub fn get(&self, row: usize, stream: usize) -> T {
        self.values[row * self.streams + stream]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.streams..(row + 1) * self.streams]
    }
}

#[derive(Debug, Deserialize)]
struct PatternFile {
    pattern: Vec<PatternEntry>,
}

#[derive(Debug, Deserialize)]
struct PatternEntry {
    name: String,
    mother_rate: String,
    period: usize,
    masks: Vec<String>,
}

const WIFI_PATTERNS: &str = include_str!("patterns.toml");

impl PuncturingPattern {
    pub fn new(name: impl Into<String>, mother_rate: CodeRate, masks: &[&str]) -> Result<Self> {
        let name = name.into();
        if masks.is_empty() {
            return Err(Error::Config(format!("pattern {name}: no stream masks")));
        }
        let period = masks[0].len();
        if period == 0 || masks.iter().any(|m| m.len() != period) {
            return Err(Error::Config(format!(
                "pattern {name}: masks must share one non-zero period"
            )));
        }
        let keep = masks
            .iter()
            .map(|m| {
                m.chars()
                    .map(|c| match c {
                        '1' => Ok(true),
                        '0' => Ok(false),
                        other => Err(Error::Config(format!("pattern {name}: bad mask char {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if mother_rate.den() != keep.len() as u64 || mother_rate.num() != 1 {
            return Err(Error::Config(format!(
                "pattern {name}: {} masks for mother rate {mother_rate}",
                keep.len()
            )));
        }
        if (0..period).any(|p| keep.iter().all(|k| !k[p])) {
            return Err(Error::Config(format!(
                "pattern {name}: a phase transmits no bit"
            )));
        }
        Ok(Self {
            name,
            mother_rate,
            keep,
        })
    }

    /// All-keep pattern of the mother code.
    pub fn identity(streams: usize) -> Self {
        let mask = vec!["1"; streams];
        Self::new(format!("1/{streams}"), CodeRate::new(1, streams as u64).unwrap(), &mask)
            .expect("identity pattern is valid")
    }

    /// The four 802.11 patterns, rates 1/2, 2/3, 3/4 and 5/6.
    pub fn wifi_defaults() -> Vec<Self> {
        Self::parse_file(WIFI_PATTERNS).expect("embedded patterns are valid")
    }

    pub fn wifi(rate: CodeRate) -> Result<Self> {
        Self::wifi_defaults()
            .into_iter()
            .find(|p| p.rate() == rate)
            .ok_or_else(|| Error::UnsupportedRate(format!("no 802.11 pattern for rate {rate}")))
    }

    /// Parses a pattern file: a TOML list of `[[pattern]]` tables with
    /// `name`, `mother_rate`, `period` and one 0/1 `masks` string per stream.
    pub fn parse_file(text: &str) -> Result<Vec<Self>> {
        let file: PatternFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("pattern file: {e}")))?;
        file.pattern
            .into_iter()
            .map(|e| {
                let masks: Vec<&str> = e.masks.iter().map(String::as_str).collect();
                let p = Self::new(e.name, e.mother_rate.parse()?, &masks)?;
                if p.period() != e.period {
                    return Err(Error::Config(format!(
                        "pattern {}: declared period {} but masks have {}",
                        p.name,
                        e.period,
                        p.period()
                    )));
                }
                Ok(p)
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Vec<Self>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_file(&text).map_err(|e| Error::Parse {
            path: path.into(),
            msg: e.to_string(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn period(&self) -> usize {
        self.keep[0].len()
    }
    pub fn streams(&self) -> usize {
        self.keep.len()
    }
    pub fn mother_rate(&self) -> CodeRate {
        self.mother_rate
    }
    pub fn keeps(&self, stream: usize, step: usize) -> bool {
        self.keep[stream][step % self.period()]
    }
    pub fn ones_per_period(&self) -> usize {
        self.keep.iter().flatten().filter(|&&k| k).count()
    }

    /// Achieved rate: `period` information bits per `ones` transmitted bits.
    pub fn rate(&self) -> CodeRate {
        CodeRate::new(self.period() as u64, self.ones_per_period() as u64).expect("non-zero ones")
    }

    /// Number of transmitted bits for `steps` trellis steps.
    pub fn transmitted_len(&self, steps: usize) -> usize {
        let full = steps / self.period() * self.ones_per_period();
        let rem = (0..steps % self.period())
            .map(|p| self.keep.iter().filter(|k| k[p]).count())
            .sum::<usize>();
        full + rem
    }

    fn check_streams<S>(&self, streams: &[S]) -> Result<()> {
        if streams.len() != self.streams() {
            return Err(Error::Shape(format!(
                "pattern {} expects {} streams, got {}",
                self.name,
                self.streams(),
                streams.len()
            )));
        }
        Ok(())
    }

    /// Serializes kept bits step by step, stream 0 first within a step.
    pub fn puncture<B: Copy>(&self, streams: &[Vec<B>]) -> Result<Vec<B>> {
        self.check_streams(streams)?;
        let steps = streams[0].len();
        if streams.iter().any(|s| s.len() != steps) {
            return Err(Error::Shape("streams differ in length".into()));
        }
        let mut out = Vec::with_capacity(self.transmitted_len(steps));
        for t in 0..steps {
            for (j, s) in streams.iter().enumerate() {
                if self.keeps(j, t) {
                    out.push(s[t]);
                }
            }
        }
        Ok(out)
    }

    /// Restores `steps x streams` LLRs, writing 0 (and indicator 0) at
    /// stolen positions.
    pub fn depuncture<T: Real>(&self, received: &[T], steps: usize) -> Result<(LlrMatrix<T>, PunctureIndicator)> {
        let e = self.transmitted_len(steps);
        if received.len() != e {
            return Err(Error::Framing(format!(
                "pattern {} over {steps} steps transmits {e} values, received {}",
                self.name,
                received.len()
            )));
        }
        let n = self.streams();
        let mut values = vec![T::zero(); steps * n];
        let mut flags = vec![0u8; steps * n];
        let mut it = received.iter();
        for t in 0..steps {
            for j in 0..n {
                if self.keeps(j, t) {
                    values[t * n + j] = *it.next().expect("length checked");
                    flags[t * n + j] = 1;
                }
            }
        }
        Ok((
            LlrMatrix {
                rows: steps,
                streams: n,
                values,
            },
            PunctureIndicator {
                rows: steps,
                streams: n,
                flags,
            },
        ))
    }
}

/// Punctures the two 802.11 streams `z, z'` into the transmitted sequence.
pub fn puncture_conv<B: Copy>(streams: &[Vec<B>], pattern: &PuncturingPattern) -> Result<Vec<B>> {
    pattern.puncture(streams)
}

/// Inverse of [`puncture_conv`] on LLRs for `steps` trellis steps.
pub fn derate_conv<T: Real>(
    received: &[T],
    pattern: &PuncturingPattern,
    steps: usize,
) -> Result<(LlrMatrix<T>, PunctureIndicator)> {
    pattern.depuncture(received, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rate(s: &str) -> CodeRate {
        s.parse().unwrap()
    }

    #[test]
    fn identity_pattern_serializes_unchanged() {
        let p = PuncturingPattern::wifi(rate("1/2")).unwrap();
        let z: Vec<u8> = (0..120).map(|i| (i % 2) as u8).collect();
        let zp: Vec<u8> = (0..120).map(|i| (i % 3 == 0) as u8).collect();
        let out = puncture_conv(&[z.clone(), zp.clone()], &p).unwrap();
        assert_eq!(out.len(), 240);
        let serial: Vec<u8> = z.iter().zip(&zp).flat_map(|(a, b)| [*a, *b]).collect();
        assert_eq!(out, serial);
    }

    #[test]
    fn standard_lengths_for_k120() {
        // ones per period x (120 / period)
        for (r, e) in [("1/2", 240), ("2/3", 180), ("3/4", 160), ("5/6", 144)] {
            let p = PuncturingPattern::wifi(rate(r)).unwrap();
            assert_eq!(p.ones_per_period() * (120 / p.period()), e);
            assert_eq!(p.transmitted_len(120), e);
            assert_eq!(p.rate(), rate(r));
        }
    }

    #[test]
    fn three_quarter_pattern_order_is_a1_b1_a2_b3() {
        let p = PuncturingPattern::wifi(rate("3/4")).unwrap();
        let a = vec!["a1", "a2", "a3"];
        let b = vec!["b1", "b2", "b3"];
        assert_eq!(p.puncture(&[a, b]).unwrap(), ["a1", "b1", "a2", "b3"]);
    }

    #[test]
    fn stolen_positions_carry_zero_llr_and_zero_flag() {
        let p = PuncturingPattern::wifi(rate("2/3")).unwrap();
        let rx: Vec<f64> = (1..=30).map(f64::from).collect();
        let (l, ind) = derate_conv(&rx, &p, 20).unwrap();
        for t in 0..20 {
            for j in 0..2 {
                let stolen = j == 1 && t % 2 == 1;
                assert_eq!(ind.get(t, j), u8::from(!stolen));
                if stolen {
                    assert_eq!(l.get(t, j), 0.0);
                } else {
                    assert_ne!(l.get(t, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn all_keep_derate_is_a_reshape() {
        let p = PuncturingPattern::identity(2);
        let rx: Vec<f32> = (0..10).map(|i| i as f32 - 4.5).collect();
        let (l, ind) = derate_conv(&rx, &p, 5).unwrap();
        assert_eq!(l.values, rx);
        assert!(ind.flags.iter().all(|&f| f == 1));
    }

    #[test]
    fn wrong_received_length_is_a_framing_error() {
        let p = PuncturingPattern::wifi(rate("3/4")).unwrap();
        assert!(matches!(derate_conv(&[0.0f64; 159], &p, 120), Err(Error::Framing(_))));
    }

    #[test]
    fn pattern_file_validation() {
        assert!(PuncturingPattern::parse_file(
            "[[pattern]]\nname='x'\nmother_rate='1/2'\nperiod=2\nmasks=['11','10']\n"
        )
        .is_ok());
        // phase with nothing transmitted
        assert!(PuncturingPattern::parse_file(
            "[[pattern]]\nname='x'\nmother_rate='1/2'\nperiod=2\nmasks=['10','00']\n"
        )
        .is_err());
        // declared period disagrees
        assert!(PuncturingPattern::parse_file(
            "[[pattern]]\nname='x'\nmother_rate='1/2'\nperiod=3\nmasks=['10','11']\n"
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn derate_then_repuncture_restores_received_values(
            which in 0usize..4, steps in 1usize..200, seed in any::<u64>()
        ) {
            let p = &PuncturingPattern::wifi_defaults()[which];
            let e = p.transmitted_len(steps);
            let rx: Vec<f64> = (0..e as u64)
                .map(|i| ((i.wrapping_mul(seed | 1) % 1000) as f64) - 499.5)
                .collect();
            let (l, ind) = derate_conv(&rx, p, steps).unwrap();
            for (v, f) in l.values.iter().zip(&ind.flags) {
                prop_assert!(*f == 1 || *v == 0.0);
            }
            let streams: Vec<Vec<f64>> = (0..2)
                .map(|j| (0..steps).map(|t| l.get(t, j)).collect())
                .collect();
            prop_assert_eq!(p.puncture(&streams).unwrap(), rx);
        }
    }
}
