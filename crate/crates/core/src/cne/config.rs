use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Conv,
    Turbo,
}

/// How parameters are laid out across the calls of the Turbo wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurboWeightLayout {
    /// A single CNE serves every call.
    #[default]
    Shared,
    /// One LSTM stack per iteration, shared by that iteration's two calls;
    /// each call has its own embedding, batch norm and output head.
    PerIterationCore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CneConfig {
    pub code: CodeKind,
    pub d_in: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub n_layers: usize,
    pub n_iter: usize,
    pub puncture_embedding: bool,
    pub turbo_layout: TurboWeightLayout,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for CneConfig {
    fn default() -> Self {
        Self {
            code: CodeKind::Conv,
            d_in: 2,
            d_embed: 64,
            d_hidden: 256,
            n_layers: 2,
            n_iter: 3,
            puncture_embedding: true,
            turbo_layout: TurboWeightLayout::Shared,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl CneConfig {
    pub fn conv(d_embed: usize, d_hidden: usize, n_layers: usize) -> Self {
        Self {
            d_embed,
            d_hidden,
            n_layers,
            ..Self::default()
        }
    }

    pub fn turbo(d_embed: usize, d_hidden: usize, n_layers: usize, n_iter: usize) -> Self {
        Self {
            code: CodeKind::Turbo,
            d_embed,
            d_hidden,
            n_layers,
            n_iter,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_in", self.d_in),
            ("d_embed", self.d_embed),
            ("d_hidden", self.d_hidden),
            ("n_layers", self.n_layers),
            ("n_iter", self.n_iter),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.d_in != 2 {
            return Err(Error::Config(format!("d_in must be 2, got {}", self.d_in)));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            return Err(Error::Config("batch-norm momentum must lie in [0, 1] and eps be positive".into()));
        }
        Ok(())
    }

    /// Number of LSTM stacks.
    pub fn num_cores(&self) -> usize {
        match (self.code, self.turbo_layout) {
            (CodeKind::Turbo, TurboWeightLayout::PerIterationCore) => self.n_iter,
            _ => 1,
        }
    }

    /// Number of embedding/BN/output sets.
    pub fn num_heads(&self) -> usize {
        match (self.code, self.turbo_layout) {
            (CodeKind::Turbo, TurboWeightLayout::PerIterationCore) => 2 * self.n_iter,
            _ => 1,
        }
    }

    /// `(core, head)` used by CNE `which` (0 or 1) in Turbo iteration `iter`.
    pub fn slots(&self, iter: usize, which: usize) -> (usize, usize) {
        match (self.code, self.turbo_layout) {
            (CodeKind::Turbo, TurboWeightLayout::PerIterationCore) => (iter, 2 * iter + which),
            _ => (0, 0),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_validation() {
        let c = CneConfig::turbo(16, 32, 1, 2);
        assert_eq!(CneConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(CneConfig::from_toml("d_hidden = 0").is_err());
        assert!(CneConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn slot_mapping() {
        let mut c = CneConfig::turbo(4, 4, 1, 3);
        assert_eq!(c.slots(2, 1), (0, 0));
        c.turbo_layout = TurboWeightLayout::PerIterationCore;
        assert_eq!((c.num_cores(), c.num_heads()), (3, 6));
        assert_eq!(c.slots(2, 1), (2, 5));
        assert_eq!(CneConfig::default().num_heads(), 1);
    }
}
