use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Normal-approximation binomial interval for `errors` out of `trials`,
/// clipped to `[0, 1]`.
pub fn binomial_ci(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let p = errors as f64 / trials as f64;
    let half = Z95 * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// One (decoder, code, K, rate, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub decoder: String,
    pub code: String,
    pub k: usize,
    pub rate: String,
    pub channel: String,
    pub modulation: String,
    pub snr_db: f64,
    pub eb_n0_db: f64,
    pub blocks: u64,
    pub bit_errors: u64,
    pub block_errors: u64,
    pub ber: f64,
    pub bler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl BerRow {
    /// Fills in the derived rates and interval from the counts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        decoder: &str,
        code: &str,
        k: usize,
        rate: &str,
        channel: &str,
        modulation: &str,
        snr_db: f64,
        eb_n0_db: f64,
        blocks: u64,
        bit_errors: u64,
        block_errors: u64,
        seed: u64,
    ) -> Self {
        let bits = blocks * k as u64;
        let (ci_low, ci_high) = binomial_ci(bit_errors, bits);
        Self {
            decoder: decoder.into(),
            code: code.into(),
            k,
            rate: rate.into(),
            channel: channel.into(),
            modulation: modulation.into(),
            snr_db,
            eb_n0_db,
            blocks,
            bit_errors,
            block_errors,
            ber: if bits == 0 { 0.0 } else { bit_errors as f64 / bits as f64 },
            bler: if blocks == 0 { 0.0 } else { block_errors as f64 / blocks as f64 },
            ci_low,
            ci_high,
            seed,
        }
    }

    fn rate_value(&self) -> f64 {
        self.rate
            .parse::<crate::rate::CodeRate>()
            .map(|r| r.as_f64())
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerReport {
    pub rows: Vec<BerRow>,
}

impl BerReport {
    /// Orders rows by decoder, rate, block length and SNR.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.decoder
                .cmp(&b.decoder)
                .then(a.rate_value().total_cmp(&b.rate_value()))
                .then(a.k.cmp(&b.k))
                .then(a.snr_db.total_cmp(&b.snr_db))
        });
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<std::result::Result<Vec<BerRow>, _>>()
            .map_err(csv_err)?;
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    /// Plot-ready series: `x` = Eb/N0, `y` = BER, `series` = decoder/rate/K.
    pub fn write_plot_data<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "series"]).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.eb_n0_db.to_string(),
                r.ber.to_string(),
                format!("{}/{}/K{}", r.decoder, r.rate, r.k),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_plot_data(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_plot_data(f)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        path: "<csv>".into(),
        msg: e.to_string(),
    }
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_matches_closed_form() {
        let (lo, hi) = binomial_ci(50, 1000);
        let half = 1.96 * (0.05f64 * 0.95 / 1000.0).sqrt();
        assert!((lo - (0.05 - half)).abs() < 1e-4);
        assert!((hi - (0.05 + half)).abs() < 1e-4);
        assert_eq!(binomial_ci(0, 100), (0.0, 0.0));
        assert_eq!(binomial_ci(1, 1).1, 1.0);
    }

    #[test]
    fn csv_round_trip_keeps_counts() {
        let mut rep = BerReport {
            rows: vec![
                BerRow::from_counts("viterbi", "conv", 120, "3/4", "awgn", "bpsk", 2.0, 0.25, 100, 37, 4, 9),
                BerRow::from_counts("viterbi", "conv", 120, "1/2", "awgn", "bpsk", 1.0, 1.0, 100, 12, 2, 9),
            ],
        };
        rep.sort();
        assert_eq!(rep.rows[0].rate, "1/2");
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let back = BerReport::read_csv(&buf[..]).unwrap();
        assert_eq!(back, rep);
        for r in &back.rows {
            assert_eq!(r.ber, r.bit_errors as f64 / (r.blocks * r.k as u64) as f64);
        }
    }
}
