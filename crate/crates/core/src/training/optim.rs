use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rate::CodeRate;
use crate::scalar::Real;

/// Per-rate training SNR: `offset + 10 log10(2R)`.
pub fn bbt_snr(rate: f64, offset_db: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Domain(format!("rate {rate} is not in (0, 1]")));
    }
    Ok(offset_db + 10.0 * (2.0 * rate).log10())
}

pub fn bbt_snr_for(rate: CodeRate, offset_db: f64) -> f64 {
    bbt_snr(rate.as_f64(), offset_db).expect("CodeRate lies in (0, 1]")
}

/// Mean logit-form binary cross-entropy of `sigmoid(logits)` against `bits`.
pub fn bce_loss<T: Real>(logits: &[T], bits: &[u8]) -> T {
    assert_eq!(logits.len(), bits.len(), "one logit per bit");
    if logits.is_empty() {
        return T::zero();
    }
    let total: T = logits
        .iter()
        .zip(bits)
        .map(|(&x, &y)| x.max(T::zero()) - x * T::lit(y as f64) + (-x.abs()).exp().ln_1p())
        .sum();
    total / T::lit(logits.len() as f64)
}

/// Cosine decay from `initial` to `last` over `total` optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSchedule {
    pub initial: f64,
    pub last: f64,
    pub total: usize,
}

impl CosineSchedule {
    pub fn new(initial: f64, last: f64, total: usize) -> Self {
        Self { initial, last, total }
    }

    /// Learning rate at `step` (0-based); the endpoints are exact.
    pub fn lr(&self, step: usize) -> f64 {
        if self.total <= 1 {
            return self.initial;
        }
        let t = step.min(self.total - 1) as f64 / (self.total - 1) as f64;
        let w = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        if w <= 0.0 {
            return self.last;
        }
        self.initial * w + self.last * (1.0 - w)
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction. Moment tensors follow the parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(shapes: &[Vec<usize>]) -> Self {
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One update `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn update(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(self.step as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(self.step as i32));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape(format!("Adam: parameter {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
            let it = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut());
            for (((p, &g), m), v) in it {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbt_examples() {
        assert_eq!(bbt_snr(0.5, 2.5).unwrap(), 2.5);
        assert_eq!(bbt_snr(0.5, -1.25).unwrap(), -1.25);
        assert!((bbt_snr(1.0 / 3.0, 1.5).unwrap() - (1.5 + 10.0 * (2.0f64 / 3.0).log10())).abs() < 1e-12);
        assert!((bbt_snr(0.75, 2.5).unwrap() - (2.5 + 10.0 * 1.5f64.log10())).abs() < 1e-12);
        assert!(bbt_snr(0.0, 1.0).is_err());
        assert!(bbt_snr(1.2, 1.0).is_err());
    }

    #[test]
    fn bce_examples() {
        let l = bce_loss(&[0.0f64; 5], &[0, 1, 0, 1, 1]);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!(bce_loss(&[20.0f64], &[1]) < 1e-8);
        assert!(bce_loss(&[-800.0f64, 800.0], &[0, 1]) == 0.0);
        let logits = [0.3, -1.7, 4.2, -0.01, 2.5];
        let bits = [1u8, 0, 0, 1, 1];
        let want: f64 = logits
            .iter()
            .zip(bits)
            .map(|(&x, y)| {
                let p = 1.0 / (1.0 + (-x as f64).exp());
                -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 5.0;
        assert!((bce_loss(&logits, &bits) - want).abs() < 1e-6);
    }

    #[test]
    fn cosine_endpoints_are_exact() {
        for &(a, b, n) in &[(1e-3, 1e-6, 6400), (1e-4, 1e-6, 3), (0.1, 0.0, 2)] {
            let s = CosineSchedule::new(a, b, n);
            assert_eq!(s.lr(0), a);
            assert_eq!(s.lr(n - 1), b);
            if n > 2 {
                assert!(s.lr(n / 2) < a && s.lr(n / 2) > b);
            }
        }
        assert_eq!(CosineSchedule::new(1e-3, 1e-6, 1).lr(0), 1e-3);
    }

    #[test]
    fn adam_step_on_quadratic_matches_closed_form() {
        // f(p) = 0.5 * a * p^2, gradient a * p.
        let (a, p0, lr) = (3.0f64, 0.7f64, 0.01);
        let mut p = Tensor::new(&[1], vec![p0]).unwrap();
        let mut opt = Adam::<f64>::new(&[vec![1]]);
        let g0 = a * p0;
        opt.update(&mut [&mut p], &[Tensor::new(&[1], vec![g0]).unwrap()], lr).unwrap();
        let m = (1.0 - 0.9) * g0 / (1.0 - 0.9);
        let v = (1.0 - 0.999) * g0 * g0 / (1.0 - 0.999);
        let want = p0 - lr * m / (v.sqrt() + 1e-8);
        assert!((p.data()[0] - want).abs() < 1e-12);
        let p1 = p.data()[0];
        let g1 = a * p1;
        opt.update(&mut [&mut p], &[Tensor::new(&[1], vec![g1]).unwrap()], lr).unwrap();
        let m2 = 0.9 * 0.1 * g0 + 0.1 * g1;
        let v2 = 0.999 * 0.001 * g0 * g0 + 0.001 * g1 * g1;
        let want2 = p1 - lr * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((p.data()[0] - want2).abs() < 1e-12);
    }
}
