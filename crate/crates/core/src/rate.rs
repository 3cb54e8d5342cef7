use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact code rate `K / E` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CodeRate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl CodeRate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::UnsupportedRate(format!(
                "{num}/{den} is not in (0, 1]"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(self) -> u64 {
        self.num
    }
    pub fn den(self) -> u64 {
        self.den
    }
    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Rate-matched length for `k` information bits, if it is an integer.
    pub fn exact_len(self, k: usize) -> Option<usize> {
        let kd = k as u64 * self.den;
        kd.is_multiple_of(self.num).then(|| (kd / self.num) as usize)
    }

    /// Rate-matched length rounded to the nearest integer.
    pub fn len_for(self, k: usize) -> usize {
        ((k as u64 * self.den + self.num / 2) / self.num) as usize
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnsupportedRate(format!("cannot parse rate {s:?}"));
        let (n, d) = s.trim().split_once('/').ok_or_else(bad)?;
        let n = n.trim().parse().map_err(|_| bad())?;
        let d = d.trim().parse().map_err(|_| bad())?;
        Self::new(n, d)
    }
}

impl Serialize for CodeRate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodeRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reduces() {
        let r: CodeRate = "6/12".parse().unwrap();
        assert_eq!((r.num(), r.den()), (1, 2));
        assert_eq!(r.to_string(), "1/2");
        assert!("0/3".parse::<CodeRate>().is_err());
        assert!("4/3".parse::<CodeRate>().is_err());
        assert!("x".parse::<CodeRate>().is_err());
    }

    #[test]
    fn exact_lengths_for_standard_block_sizes() {
        for k in [120, 240, 480, 960] {
            for r in ["1/3", "1/2", "2/3", "3/4", "5/6"] {
                let r: CodeRate = r.parse().unwrap();
                let e = r.exact_len(k).unwrap();
                assert_eq!(e as u64 * r.num(), k as u64 * r.den());
            }
        }
        assert_eq!(CodeRate::new(2, 3).unwrap().exact_len(7), None);
        assert_eq!(CodeRate::new(2, 3).unwrap().len_for(7), 11);
    }
}
