use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Quadratic permutation polynomial interleaver, `pi(i) = (f1 i + f2 i^2) mod K`.
///
/// Interleaving reads `out[i] = x[pi(i)]`; de-interleaving is its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QppInterleaver {
    k: usize,
    f1: u64,
    f2: u64,
    table: Vec<usize>,
    inverse: Vec<usize>,
}

impl QppInterleaver {
    pub fn new(k: usize, f1: u64, f2: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("interleaver length must be positive".into()));
        }
        let km = k as u64;
        let mut table = Vec::with_capacity(k);
        let mut inverse = vec![usize::MAX; k];
        for i in 0..km {
            let p = ((f1 % km) * i + (f2 % km) * (i * i % km) % km) % km;
            let p = p as usize;
            if inverse[p] != usize::MAX {
                return Err(Error::Config(format!(
                    "QPP (K={k}, f1={f1}, f2={f2}) is not a permutation: \
                     indices {} and {i} both map to {p}",
                    inverse[p]
                )));
            }
            inverse[p] = i as usize;
            table.push(p);
        }
        Ok(Self {
            k,
            f1,
            f2,
            table,
            inverse,
        })
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(k, 1, 0)
    }

    pub fn len(&self) -> usize {
        self.k
    }
    pub fn is_empty(&self) -> bool {
        self.k == 0
    }
    pub fn coefficients(&self) -> (u64, u64) {
        (self.f1, self.f2)
    }
    pub fn table(&self) -> &[usize] {
        &self.table
    }
    pub fn inverse_table(&self) -> &[usize] {
        &self.inverse
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.k {
            return Err(Error::Config(format!(
                "sequence length {n} does not match interleaver length {}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x.len())?;
        Ok(self.table.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_len(y.len())?;
        Ok(self.inverse.iter().map(|&q| y[q]).collect())
    }
}

#[derive(Debug, Deserialize)]
struct QppFile {
    qpp: Vec<QppEntry>,
}

#[derive(Debug, Deserialize)]
struct QppEntry {
    k: usize,
    f1: u64,
    f2: u64,
}

/// Per-block-length QPP coefficients loaded from a parameter file.
///
/// File grammar (TOML):
///
/// ```toml
/// [[qpp]]
/// k = 40
/// f1 = 3
/// f2 = 10
/// ```
#[derive(Debug, Clone, Default)]
pub struct QppTable {
    entries: BTreeMap<usize, (u64, u64)>,
}

const LTE_DEFAULTS: &str = include_str!("qpp_defaults.toml");

impl QppTable {
    /// Built-in coefficients: the LTE sizes 40, 48, 56, 64, 120, 240, 480 and
    /// 960, plus a short length 24 for quick experiments.
    pub fn lte_defaults() -> Self {
        Self::parse(LTE_DEFAULTS).expect("embedded QPP table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: QppFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("QPP table: {e}")))?;
        let mut entries = BTreeMap::new();
        for e in file.qpp {
            QppInterleaver::new(e.k, e.f1, e.f2)?;
            if entries.insert(e.k, (e.f1, e.f2)).is_some() {
                return Err(Error::Config(format!("QPP table lists K={} twice", e.k)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Parse {
            path: path.into(),
            msg: e.to_string(),
        })
    }

    pub fn coefficients(&self, k: usize) -> Option<(u64, u64)> {
        self.entries.get(&k).copied()
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn interleaver(&self, k: usize) -> Result<QppInterleaver> {
        let (f1, f2) = self
            .coefficients(k)
            .ok_or_else(|| Error::Config(format!("no QPP coefficients for K={k}")))?;
        QppInterleaver::new(k, f1, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_linear_coefficient_is_identity() {
        let q = QppInterleaver::new(8, 1, 0).unwrap();
        assert_eq!(q.table(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn k8_f1_3_f2_4_matches_direct_formula() {
        let q = QppInterleaver::new(8, 3, 4).unwrap();
        let direct: Vec<usize> = (0..8u64).map(|i| ((3 * i + 4 * i * i) % 8) as usize).collect();
        assert_eq!(q.table(), direct.as_slice());
        let mut seen = direct.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        assert_eq!(direct, [0, 7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn even_linear_map_is_rejected_with_collision() {
        let err = QppInterleaver::new(8, 2, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("indices 0 and 4"), "{msg}");
    }

    #[test]
    fn default_table_covers_standard_lengths_with_valid_permutations() {
        let t = QppTable::lte_defaults();
        for k in [40, 120, 240, 480, 960] {
            let q = t.interleaver(k).unwrap();
            assert_eq!(q.len(), k);
        }
        assert!(t.interleaver(41).is_err());
    }

    #[test]
    fn duplicate_table_entries_are_rejected() {
        let text = "[[qpp]]\nk = 8\nf1 = 1\nf2 = 0\n[[qpp]]\nk = 8\nf1 = 3\nf2 = 4\n";
        assert!(QppTable::parse(text).is_err());
        let bad = "[[qpp]]\nk = 8\nf1 = 2\nf2 = 0\n";
        assert!(QppTable::parse(bad).is_err());
    }

    #[test]
    fn length_mismatch_is_a_configuration_error() {
        let q = QppInterleaver::identity(8).unwrap();
        assert!(matches!(q.interleave(&[0u8; 7]), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn deinterleave_inverts_interleave(k in prop::sample::select(vec![40usize, 120, 240, 480, 960]),
                                           seed in any::<u64>()) {
            let q = QppTable::lte_defaults().interleaver(k).unwrap();
            let x: Vec<u64> = (0..k as u64).map(|i| i.wrapping_mul(seed | 1)).collect();
            let y = q.interleave(&x).unwrap();
            prop_assert_eq!(q.deinterleave(&y).unwrap(), x.clone());
            prop_assert_eq!(q.interleave(&q.deinterleave(&x).unwrap()).unwrap(), x);
        }
    }
}
