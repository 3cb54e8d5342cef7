use rand::Rng;

use super::config::CneConfig;
use crate::autodiff::{BnBatchStats, DiffArray, Tape, Tensor, TensorArchive};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One LSTM direction. Gate blocks are `[i, f, c~, o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection<T> {
    pub w_ih: Tensor<T>,
    pub w_hh: Tensor<T>,
    pub b_ih: Tensor<T>,
    pub b_hh: Tensor<T>,
}

/// Bidirectional stack: `layers[l][0]` forward, `layers[l][1]` backward.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack<T> {
    pub layers: Vec<[LstmDirection<T>; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Real> BatchNormState<T> {
    fn new(d: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: Tensor::full(&[d], T::one()),
            beta: Tensor::zeros(&[d]),
            running_mean: vec![T::zero(); d],
            running_var: vec![T::one(); d],
            momentum: T::lit(momentum),
            eps: T::lit(eps),
        }
    }

    /// Folds one training batch into the running averages.
    pub fn update(&mut self, stats: &BnBatchStats<T>) {
        let m = self.momentum;
        let keep = T::one() - m;
        for (r, &b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = keep * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&stats.var_unbiased) {
            *r = keep * *r + m * b;
        }
    }
}

/// Input embedding, puncture gate, batch norm and output head of one CNE.
#[derive(Debug, Clone, PartialEq)]
pub struct CneHead<T> {
    pub w_proj: Tensor<T>,
    pub b_proj: Tensor<T>,
    /// Absent when the puncture embedding is disabled.
    pub punc: Option<(Tensor<T>, Tensor<T>)>,
    pub bn: BatchNormState<T>,
    pub w_out: Tensor<T>,
    pub b_out: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CneParameters<T> {
    pub config: CneConfig,
    pub cores: Vec<LstmStack<T>>,
    pub heads: Vec<CneHead<T>>,
}

fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::lit(rng.random_range(-bound..=bound)))
}

impl<T: Real> CneParameters<T> {
    /// All-zero weights (batch-norm scale included) with unit running
    /// variance.
    pub fn zeros(config: &CneConfig) -> Result<Self> {
        config.validate()?;
        let mut p = Self::build(config, &mut |shape, _| Tensor::zeros(shape));
        for h in &mut p.heads {
            h.bn.gamma = Tensor::zeros(&[config.d_embed]);
        }
        Ok(p)
    }

    /// Fan-in uniform initialization: LSTM blocks in `+-1/sqrt(H)`, affine
    /// layers in `+-1/sqrt(fan_in)`, forget-gate input bias `+1` (recurrent
    /// forget bias 0), batch norm `gamma = 1`, `beta = 0`.
    pub fn init<R: Rng + ?Sized>(config: &CneConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.d_hidden;
        let mut p = Self::build(config, &mut |shape, bound| uniform(rng, shape, bound));
        for core in &mut p.cores {
            for layer in &mut core.layers {
                for dir in layer.iter_mut() {
                    dir.b_ih.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = T::one());
                    dir.b_hh.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = T::zero());
                }
            }
        }
        Ok(p)
    }

    fn build(config: &CneConfig, make: &mut dyn FnMut(&[usize], f64) -> Tensor<T>) -> Self {
        let (din, e, h) = (config.d_in, config.d_embed, config.d_hidden);
        let lstm_bound = 1.0 / (h as f64).sqrt();
        let cores = (0..config.num_cores())
            .map(|_| LstmStack {
                layers: (0..config.n_layers)
                    .map(|l| {
                        let width = if l == 0 { e } else { 2 * h };
                        let mut dir = || LstmDirection {
                            w_ih: make(&[4 * h, width], lstm_bound),
                            w_hh: make(&[4 * h, h], lstm_bound),
                            b_ih: make(&[4 * h], lstm_bound),
                            b_hh: make(&[4 * h], lstm_bound),
                        };
                        [dir(), dir()]
                    })
                    .collect(),
            })
            .collect();
        let in_bound = 1.0 / (din as f64).sqrt();
        let out_bound = 1.0 / ((2 * h) as f64).sqrt();
        let heads = (0..config.num_heads())
            .map(|_| CneHead {
                w_proj: make(&[e, din], in_bound),
                b_proj: make(&[e], in_bound),
                punc: config
                    .puncture_embedding
                    .then(|| (make(&[e, din], in_bound), make(&[e], in_bound))),
                bn: BatchNormState::new(e, config.bn_momentum, config.bn_eps),
                w_out: make(&[1, 2 * h], out_bound),
                b_out: make(&[1], out_bound),
            })
            .collect();
        Self {
            config: config.clone(),
            cores,
            heads,
        }
    }

    /// Trainable tensors with their checkpoint names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (c, core) in self.cores.iter().enumerate() {
            for (l, layer) in core.layers.iter().enumerate() {
                for (d, dir) in layer.iter().enumerate() {
                    let pre = format!("core{c}.layer{l}.{}", ["fwd", "bwd"][d]);
                    out.push((format!("{pre}.w_ih"), &dir.w_ih));
                    out.push((format!("{pre}.w_hh"), &dir.w_hh));
                    out.push((format!("{pre}.b_ih"), &dir.b_ih));
                    out.push((format!("{pre}.b_hh"), &dir.b_hh));
                }
            }
        }
        for (i, h) in self.heads.iter().enumerate() {
            out.push((format!("head{i}.proj.w"), &h.w_proj));
            out.push((format!("head{i}.proj.b"), &h.b_proj));
            if let Some((w, b)) = &h.punc {
                out.push((format!("head{i}.punc.w"), w));
                out.push((format!("head{i}.punc.b"), b));
            }
            out.push((format!("head{i}.bn.gamma"), &h.bn.gamma));
            out.push((format!("head{i}.bn.beta"), &h.bn.beta));
            out.push((format!("head{i}.out.w"), &h.w_out));
            out.push((format!("head{i}.out.b"), &h.b_out));
        }
        out
    }

    /// Mutable trainable tensors in the order of [`named`](Self::named).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for core in &mut self.cores {
            for layer in &mut core.layers {
                for dir in layer.iter_mut() {
                    out.push(&mut dir.w_ih);
                    out.push(&mut dir.w_hh);
                    out.push(&mut dir.b_ih);
                    out.push(&mut dir.b_hh);
                }
            }
        }
        for h in &mut self.heads {
            out.push(&mut h.w_proj);
            out.push(&mut h.b_proj);
            if let Some((w, b)) = &mut h.punc {
                out.push(w);
                out.push(b);
            }
            out.push(&mut h.bn.gamma);
            out.push(&mut h.bn.beta);
            out.push(&mut h.w_out);
            out.push(&mut h.b_out);
        }
        out
    }

    pub fn num_trainable(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Places every trainable tensor on the tape, as trainable leaves or as
    /// constants.
    pub fn register(&self, tape: &mut Tape<T>, trainable: bool) -> CneVars {
        self.vars_with(&mut |t: &Tensor<T>| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
    }

    /// Arranges existing tape handles, given in the order of
    /// [`named`](Self::named), into a [`CneVars`].
    pub fn bind(&self, handles: &[DiffArray]) -> Result<CneVars> {
        let expected = self.named().len();
        if handles.len() != expected {
            return Err(Error::Shape(format!("{} handles for {expected} tensors", handles.len())));
        }
        let mut it = handles.iter().copied();
        Ok(self.vars_with(&mut |_| it.next().expect("length checked")))
    }

    fn vars_with(&self, leaf: &mut dyn FnMut(&Tensor<T>) -> DiffArray) -> CneVars {
        let cores = self
            .cores
            .iter()
            .map(|core| {
                core.layers
                    .iter()
                    .map(|layer| {
                        let mut dir = |d: &LstmDirection<T>| DirVars {
                            w_ih: leaf(&d.w_ih),
                            w_hh: leaf(&d.w_hh),
                            b_ih: leaf(&d.b_ih),
                            b_hh: leaf(&d.b_hh),
                        };
                        [dir(&layer[0]), dir(&layer[1])]
                    })
                    .collect()
            })
            .collect();
        let heads = self
            .heads
            .iter()
            .map(|h| HeadVars {
                w_proj: leaf(&h.w_proj),
                b_proj: leaf(&h.b_proj),
                punc: h.punc.as_ref().map(|(w, b)| (leaf(w), leaf(b))),
                gamma: leaf(&h.bn.gamma),
                beta: leaf(&h.bn.beta),
                w_out: leaf(&h.w_out),
                b_out: leaf(&h.b_out),
            })
            .collect();
        CneVars { cores, heads }
    }

    /// Serializes parameters (`param.*`) and batch-norm running statistics
    /// (`bn.*`) with the model configuration as preamble.
    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new(self.config.to_toml());
        for (name, t) in self.named() {
            a.push(format!("param.{name}"), t);
        }
        for (i, h) in self.heads.iter().enumerate() {
            let d = h.bn.running_mean.len();
            a.push(format!("bn.head{i}.running_mean"), &Tensor::new(&[d], h.bn.running_mean.clone()).expect("len"));
            a.push(format!("bn.head{i}.running_var"), &Tensor::new(&[d], h.bn.running_var.clone()).expect("len"));
        }
        a
    }

    /// Restores from an archive. When `expected` is given the stored model
    /// configuration must equal it.
    pub fn from_archive(a: &TensorArchive, expected: Option<&CneConfig>) -> Result<Self> {
        let config = model_config(&a.preamble).map_err(|e| Error::Checkpoint(format!("bad model preamble: {e}")))?;
        if let Some(want) = expected {
            if *want != config {
                return Err(Error::Checkpoint(format!(
                    "checkpoint model {:?} does not match configured model {:?}",
                    config, want
                )));
            }
        }
        let mut p = Self::zeros(&config)?;
        let names: Vec<(String, Vec<usize>)> =
            p.named().iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        for ((name, shape), slot) in names.iter().zip(p.tensors_mut()) {
            *slot = a.expect(&format!("param.{name}"), shape)?;
        }
        for (i, h) in p.heads.iter_mut().enumerate() {
            let d = h.bn.running_mean.len();
            h.bn.running_mean = a.expect::<T>(&format!("bn.head{i}.running_mean"), &[d])?.into_data();
            h.bn.running_var = a.expect::<T>(&format!("bn.head{i}.running_var"), &[d])?.into_data();
        }
        Ok(p)
    }
}

/// Model configuration from an archive preamble: either the bare config or
/// a document with a `[model]` table.
pub fn model_config(preamble: &str) -> Result<CneConfig> {
    let doc: toml::Table = toml::from_str(preamble).map_err(|e| Error::Config(e.to_string()))?;
    match doc.get("model") {
        Some(toml::Value::Table(m)) => CneConfig::from_toml(&toml::to_string(m).expect("table serializes")),
        _ => CneConfig::from_toml(preamble),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirVars {
    pub w_ih: DiffArray,
    pub w_hh: DiffArray,
    pub b_ih: DiffArray,
    pub b_hh: DiffArray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadVars {
    pub w_proj: DiffArray,
    pub b_proj: DiffArray,
    pub punc: Option<(DiffArray, DiffArray)>,
    pub gamma: DiffArray,
    pub beta: DiffArray,
    pub w_out: DiffArray,
    pub b_out: DiffArray,
}

/// Tape handles of a registered [`CneParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct CneVars {
    pub cores: Vec<Vec<[DirVars; 2]>>,
    pub heads: Vec<HeadVars>,
}

impl CneVars {
    /// All handles in the order of [`CneParameters::named`].
    pub fn flat(&self) -> Vec<DiffArray> {
        let mut out = Vec::new();
        for core in &self.cores {
            for layer in core {
                for d in layer {
                    out.extend([d.w_ih, d.w_hh, d.b_ih, d.b_hh]);
                }
            }
        }
        for h in &self.heads {
            out.extend([h.w_proj, h.b_proj]);
            if let Some((w, b)) = h.punc {
                out.extend([w, b]);
            }
            out.extend([h.gamma, h.beta, h.w_out, h.b_out]);
        }
        out
    }
}
