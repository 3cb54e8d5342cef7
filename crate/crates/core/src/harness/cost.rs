use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{BnMode, Tape, Tensor};
use crate::cne::{cne_forward, cne_turbo_forward, CneConfig, CneParameters, CodeKind, TurboInputs};
use crate::codec::{QppInterleaver, Trellis};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub elements: usize,
}

/// Multiply-accumulates of one CNE call per sequence position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacTerm {
    pub name: String,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyTerm {
    pub name: String,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub code: String,
    pub k: usize,
    pub trainable_parameters: usize,
    pub shapes: Vec<ShapeEntry>,
    /// CNE evaluations per decoded block.
    pub cne_calls: usize,
    pub mac_terms: Vec<MacTerm>,
    /// Layer-wise count (LSTM cells include their 16 H pointwise products,
    /// batch norm 4 per feature, gating and activations free).
    pub macs_per_decoded_bit: u64,
    /// Closed-form per-position complexity generalized to stacked layers:
    /// `sum_l (8H^2 + 8 H d_l + 14 H) + 2 D_in E + 2 E + 2 H`.
    pub formula_macs_per_decoded_bit: u64,
    /// Counted on the differentiation tape for one block, if requested.
    pub instrumented_macs_per_decoded_bit: Option<f64>,
    pub viterbi_ops_per_block: u64,
    pub bcjr_ops_per_block: u64,
    pub latency: Vec<LatencyTerm>,
}

impl CostReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let push = |s: &mut String, l: String| {
            s.push_str(&l);
            s.push('\n');
        };
        push(&mut s, format!("code: {}  K: {}", self.code, self.k));
        push(&mut s, format!("trainable parameters: {}", self.trainable_parameters));
        for e in &self.shapes {
            push(&mut s, format!("  {:<28} {:>14} {:>10}", e.name, format!("{:?}", e.shape), e.elements));
        }
        push(&mut s, format!("CNE calls per block: {}", self.cne_calls));
        push(&mut s, "MACs per position per call:".into());
        for t in &self.mac_terms {
            push(&mut s, format!("  {:<28} {:>12}", t.name, t.macs));
        }
        push(&mut s, format!("MACs/decoded bit: {}", self.macs_per_decoded_bit));
        push(&mut s, format!("MACs/decoded bit (closed form): {}", self.formula_macs_per_decoded_bit));
        if let Some(m) = self.instrumented_macs_per_decoded_bit {
            push(&mut s, format!("MACs/decoded bit (instrumented): {m:.1}"));
        }
        push(&mut s, format!("Viterbi ops/block (K 2^(L-1)): {}", self.viterbi_ops_per_block));
        push(&mut s, format!("BCJR ops/block (N_iter K 2^(L+1)): {}", self.bcjr_ops_per_block));
        push(&mut s, "latency:".into());
        for t in &self.latency {
            push(&mut s, format!("  {} = {}", t.name, t.expression));
        }
        s
    }
}

fn lstm_cell_macs(d_in: usize, h: usize) -> u64 {
    (4 * (d_in + h) * h + 16 * h) as u64
}

/// Per-position MAC terms of one CNE call.
pub fn mac_terms(cfg: &CneConfig) -> Vec<MacTerm> {
    let (din, e, h) = (cfg.d_in, cfg.d_embed, cfg.d_hidden);
    let mut t = vec![MacTerm {
        name: "proj".into(),
        macs: (din * e) as u64,
    }];
    if cfg.puncture_embedding {
        t.push(MacTerm {
            name: "punc".into(),
            macs: (din * e) as u64,
        });
    }
    t.push(MacTerm {
        name: "batchnorm".into(),
        macs: 4 * e as u64,
    });
    for l in 0..cfg.n_layers {
        let width = if l == 0 { e } else { 2 * h };
        t.push(MacTerm {
            name: format!("lstm layer{l} (2 directions)"),
            macs: 2 * lstm_cell_macs(width, h),
        });
    }
    t.push(MacTerm {
        name: "out".into(),
        macs: 2 * h as u64,
    });
    t
}

pub fn formula_macs(cfg: &CneConfig) -> u64 {
    let (din, e, h) = (cfg.d_in as u64, cfg.d_embed as u64, cfg.d_hidden as u64);
    let lstm: u64 = (0..cfg.n_layers)
        .map(|l| {
            let d = if l == 0 { e } else { 2 * h };
            8 * h * h + 8 * h * d + 14 * h
        })
        .sum();
    lstm + 2 * din * e + 2 * e + 2 * h
}

fn cne_calls(cfg: &CneConfig) -> usize {
    match cfg.code {
        CodeKind::Conv => 1,
        CodeKind::Turbo => 2 * cfg.n_iter,
    }
}

fn latency_terms(cfg: &CneConfig, k: usize, trellis: &Trellis) -> Vec<LatencyTerm> {
    let (din, e, h) = (cfg.d_in, cfg.d_embed, cfg.d_hidden);
    let l = trellis.constraint_length();
    let lt = |n: &str, x: String| LatencyTerm {
        name: n.into(),
        expression: x,
    };
    let mut v = vec![
        lt("T_proj", format!("t_mat({e}, {din})")),
        lt("T_BN", format!("t_bn({e})")),
        lt("T_LSTM", format!("{k} * {} * t_lstm({h}, {e})", cfg.n_layers)),
        lt("T_out", format!("t_mat(1, {})", 2 * h)),
        lt("T_CNE", "T_proj + T_BN + T_LSTM + T_out".into()),
    ];
    match cfg.code {
        CodeKind::Conv => v.push(lt("T_Viterbi", format!("{k} * t_state({})", 1usize << (l - 1)))),
        CodeKind::Turbo => {
            v.push(lt("T_CNE_Turbo", format!("{} * T_CNE", 2 * cfg.n_iter)));
            v.push(lt("T_BCJR", format!("2 * N_iter * {k} * t_state({})", 1usize << (l - 1))));
        }
    }
    v
}

/// Parameter, MAC and latency accounting for a model on blocks of `k` bits.
/// No weights are needed; with `instrument` a forward pass over one block is
/// run with random weights to count MACs directly.
pub fn cost_model(cfg: &CneConfig, k: usize, bcjr_iterations: usize, instrument: bool) -> Result<CostReport> {
    let zeros = CneParameters::<f32>::zeros(cfg)?;
    let shapes: Vec<ShapeEntry> = zeros
        .named()
        .into_iter()
        .map(|(name, t)| ShapeEntry {
            name,
            shape: t.shape().to_vec(),
            elements: t.len(),
        })
        .collect();
    let terms = mac_terms(cfg);
    let calls = cne_calls(cfg);
    let per_call: u64 = terms.iter().map(|t| t.macs).sum();
    let trellis = match cfg.code {
        CodeKind::Conv => Trellis::wifi_k7(),
        CodeKind::Turbo => Trellis::lte_turbo_constituent(),
    };
    let l = trellis.constraint_length() as u32;
    let instrumented = if instrument { Some(instrumented_macs(cfg, k)?) } else { None };
    Ok(CostReport {
        code: format!("{:?}", cfg.code).to_lowercase(),
        k,
        trainable_parameters: shapes.iter().map(|s| s.elements).sum(),
        shapes,
        cne_calls: calls,
        mac_terms: terms,
        macs_per_decoded_bit: per_call * calls as u64,
        formula_macs_per_decoded_bit: formula_macs(cfg) * calls as u64,
        instrumented_macs_per_decoded_bit: instrumented,
        viterbi_ops_per_block: k as u64 * 2u64.pow(l - 1),
        bcjr_ops_per_block: (bcjr_iterations * k) as u64 * 2u64.pow(l + 1),
        latency: latency_terms(cfg, k, &trellis),
    })
}

/// Tape-counted MACs per decoded bit for a single block of `k` positions.
pub fn instrumented_macs(cfg: &CneConfig, k: usize) -> Result<f64> {
    let params = CneParameters::<f32>::init(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let input = |v: f32| Tensor::full(&[1, k], v);
    match cfg.code {
        CodeKind::Conv => {
            let x = tape.constant(Tensor::full(&[1, k, cfg.d_in], 0.5));
            let p = tape.constant(Tensor::full(&[1, k, cfg.d_in], 1.0));
            cne_forward(&mut tape, &params, &vars, 0, 0, x, p, BnMode::Eval, &mut Vec::new())?;
        }
        CodeKind::Turbo => {
            let inputs = TurboInputs {
                llr_s: input(0.5),
                llr_z: input(-0.5),
                llr_zp: input(0.25),
                p_s: input(1.0),
                p_z: input(1.0),
                p_zp: input(1.0),
            };
            let pi = QppInterleaver::identity(k)?;
            cne_turbo_forward(&mut tape, &params, &vars, &inputs, &pi, BnMode::Eval, &mut Vec::new())?;
        }
    }
    Ok(tape.macs() as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cne::TurboWeightLayout;

    #[test]
    fn default_conv_counts() {
        let r = cost_model(&CneConfig::conv(64, 256, 2), 120, 6, false).unwrap();
        assert_eq!(r.trainable_parameters, 2_237_441);
        assert_eq!(r.macs_per_decoded_bit, 2_245_632);
    }

    #[test]
    fn turbo_counts_per_layout() {
        let mut cfg = CneConfig::turbo(64, 256, 2, 3);
        assert_eq!(cost_model(&cfg, 120, 6, false).unwrap().trainable_parameters, 2_237_441);
        cfg.turbo_layout = TurboWeightLayout::PerIterationCore;
        let r = cost_model(&cfg, 120, 6, false).unwrap();
        assert_eq!(r.trainable_parameters, 6_715_398);
        assert_eq!(r.cne_calls, 6);
        assert_eq!(r.macs_per_decoded_bit, 6 * 2_245_632);
    }

    #[test]
    fn unit_dims_by_hand() {
        // E = H = 1, D_in = 2, one layer:
        // LSTM per direction: w_ih 4x1, w_hh 4x1, b_ih 4, b_hh 4 = 16, two
        // directions = 32; proj 2+1, punc 2+1, bn 2, out 2+1 = 11.
        let cfg = CneConfig::conv(1, 1, 1);
        let r = cost_model(&cfg, 8, 6, false).unwrap();
        assert_eq!(r.trainable_parameters, 43);
        let by_hand = [[4, 1], [4, 1]];
        assert_eq!(r.shapes[0].shape, by_hand[0]);
        assert_eq!(r.shapes.iter().map(|s| s.elements).sum::<usize>(), 43);
    }

    #[test]
    fn instrumented_count_is_close_to_layerwise_count() {
        let cfg = CneConfig::conv(8, 12, 2);
        let r = cost_model(&cfg, 16, 6, true).unwrap();
        let inst = r.instrumented_macs_per_decoded_bit.unwrap();
        let rel = (inst - r.macs_per_decoded_bit as f64).abs() / r.macs_per_decoded_bit as f64;
        assert!(rel < 0.1, "instrumented {inst} vs {}", r.macs_per_decoded_bit);
    }

    #[test]
    fn classical_op_counts() {
        let r = cost_model(&CneConfig::conv(8, 8, 1), 120, 6, false).unwrap();
        assert_eq!(r.viterbi_ops_per_block, 120 * 64);
        let r = cost_model(&CneConfig::turbo(8, 8, 1, 3), 120, 6, false).unwrap();
        assert_eq!(r.bcjr_ops_per_block, 6 * 120 * 32);
        assert!(r.latency.iter().any(|t| t.name == "T_BCJR"));
    }
}
