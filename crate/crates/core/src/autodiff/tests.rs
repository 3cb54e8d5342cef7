use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Result;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

fn proj(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

const TOL: f64 = 1e-4;

#[test]
fn affine_identity_and_bias_gradient() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let mut eye = Tensor::zeros(&[3, 3]);
    for i in 0..3 {
        eye.data_mut()[i * 4] = 1.0;
    }
    let w = tape.param(eye);
    let b = tape.param(Tensor::zeros(&[3]));
    let y = tape.affine(x, w, Some(b)).unwrap();
    assert_eq!(tape.value(y), tape.value(x));
    let s = tape.sum(y).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(b).unwrap().data(), &[2.0, 2.0, 2.0]);
    assert!(g.get(x).is_none());
    assert_eq!(tape.macs(), 18);
}

#[test]
fn affine_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = vec![
        rand_tensor(&mut rng, &[4, 3], 1.0),
        rand_tensor(&mut rng, &[5, 3], 1.0),
        rand_tensor(&mut rng, &[5], 1.0),
    ];
    let w = proj(&mut rng, 20);
    let r = grad_check(&params, 1000, 0, |t, v| {
        let y = t.affine(v[0], v[1], Some(v[2]))?;
        t.weighted_sum(y, &w)
    })
    .unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn pointwise_ops_pass_grad_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = vec![rand_tensor(&mut rng, &[3, 4], 2.0), rand_tensor(&mut rng, &[3, 4], 2.0)];
    let w = proj(&mut rng, 12);
    let r = grad_check(&params, 1000, 0, |t, v| {
        let s = t.sigmoid(v[0]);
        let h = t.tanh(v[1]);
        let m = t.mul(s, h)?;
        let a = t.add(m, v[0])?;
        let d = t.sub(a, v[1])?;
        let e = t.scale(d, 0.7);
        t.weighted_sum(e, &w)
    })
    .unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn concat_slice_gather_pass_grad_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![rand_tensor(&mut rng, &[2, 5, 2], 1.0), rand_tensor(&mut rng, &[2, 5, 3], 1.0)];
    let w = proj(&mut rng, 2 * 5 * 4);
    let perm = [3usize, 0, 4, 1, 2];
    let r = grad_check(&params, 1000, 0, |t, v| {
        let c = t.concat(&[v[0], v[1]])?;
        let g = t.gather_seq(c, &perm)?;
        let s = t.slice_last(g, 1, 4)?;
        let q = t.tanh(s);
        t.weighted_sum(q, &w)
    })
    .unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn gather_then_inverse_is_identity() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::from_fn(&[1, 4, 1], |i| i as f64));
    let g = tape.gather_seq(x, &[2, 0, 3, 1]).unwrap();
    assert_eq!(tape.value(g).data(), &[2.0, 0.0, 3.0, 1.0]);
    let back = tape.gather_seq(g, &[1, 3, 0, 2]).unwrap();
    assert_eq!(tape.value(back).data(), tape.value(x).data());
}

fn bn_forward(t: &mut Tape<f64>, v: &[DiffArray], mode: BnMode) -> Result<DiffArray> {
    let d = t.shape(v[1])[0];
    let rm: Vec<f64> = (0..d).map(|j| 0.1 * j as f64).collect();
    let rv: Vec<f64> = (0..d).map(|j| 1.0 + 0.2 * j as f64).collect();
    Ok(t.batchnorm(v[0], v[1], v[2], mode, (&rm, &rv), 1e-5)?.0)
}

#[test]
fn batchnorm_training_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(rand_tensor(&mut rng, &[8, 10, 3], 5.0));
    let g = tape.param(Tensor::full(&[3], 1.0));
    let b = tape.param(Tensor::zeros(&[3]));
    let (y, stats) = tape.batchnorm(x, g, b, BnMode::Train, (&[], &[]), 1e-5).unwrap();
    assert!(stats.is_some());
    let v = tape.value(y).data();
    for j in 0..3 {
        let col: Vec<f64> = v.iter().skip(j).step_by(3).copied().collect();
        let n = col.len() as f64;
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n;
        assert!(m.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-4);
    }
}

#[test]
fn batchnorm_eval_with_unit_stats_is_affine() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let g = tape.param(Tensor::new(&[2], vec![2.0, 3.0]).unwrap());
    let b = tape.param(Tensor::new(&[2], vec![0.5, -0.5]).unwrap());
    let (y, stats) = tape.batchnorm(x, g, b, BnMode::Eval, (&[0.0, 0.0], &[1.0, 1.0]), 0.0).unwrap();
    assert!(stats.is_none());
    assert_eq!(tape.value(y).data(), &[2.5, 5.5, 6.5, 11.5]);
}

#[test]
fn batchnorm_rejects_single_sample_in_training() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros(&[1, 1, 4]));
    let g = tape.param(Tensor::full(&[4], 1.0));
    let b = tape.param(Tensor::zeros(&[4]));
    assert!(matches!(
        tape.batchnorm(x, g, b, BnMode::Train, (&[], &[]), 1e-5),
        Err(crate::Error::DegenerateBatch(_))
    ));
}

#[test]
fn batchnorm_passes_grad_check_in_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = vec![
        rand_tensor(&mut rng, &[3, 4, 3], 2.0),
        rand_tensor(&mut rng, &[3], 1.5),
        rand_tensor(&mut rng, &[3], 1.0),
    ];
    let w = proj(&mut rng, 36);
    for mode in [BnMode::Train, BnMode::Eval] {
        let r = grad_check(&params, 1000, 0, |t, v| {
            let y = bn_forward(t, v, mode)?;
            let y = t.tanh(y);
            t.weighted_sum(y, &w)
        })
        .unwrap();
        assert!(r.max_rel_error < TOL, "{mode:?}: {r:?}");
    }
}

fn lstm_params(rng: &mut ChaCha8Rng, d_in: usize, h: usize, scale: f64) -> Vec<Tensor<f64>> {
    vec![
        rand_tensor(rng, &[4 * h, d_in], scale),
        rand_tensor(rng, &[4 * h, h], scale),
        rand_tensor(rng, &[4 * h], scale),
        rand_tensor(rng, &[4 * h], scale),
    ]
}

#[test]
fn zero_lstm_outputs_zero() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full(&[2, 5, 3], 0.7));
    let shapes: [&[usize]; 4] = [&[8, 3], &[8, 2], &[8], &[8]];
    let p: Vec<DiffArray> = shapes.iter().map(|s| tape.param(Tensor::zeros(s))).collect();
    let y = tape.lstm(x, p[0], p[1], p[2], p[3], false).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn single_step_equals_one_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (d, h) = (3, 2);
    let p = lstm_params(&mut rng, d, h, 0.8);
    let xv = rand_tensor(&mut rng, &[1, 1, d], 1.0);
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(xv.clone());
    let v: Vec<DiffArray> = p.iter().map(|t| tape.param(t.clone())).collect();
    let y = tape.lstm(x, v[0], v[1], v[2], v[3], true).unwrap();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    for j in 0..h {
        let pre = |gate: usize| {
            let r = gate * h + j;
            (0..d).map(|k| p[0].data()[r * d + k] * xv.data()[k]).sum::<f64>() + p[2].data()[r] + p[3].data()[r]
        };
        let c = sig(pre(0)) * pre(2).tanh();
        let want = sig(pre(3)) * c.tanh();
        assert!((tape.value(y).data()[j] - want).abs() < 1e-14);
    }
}

#[test]
fn lstm_bptt_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (b, k, d, h) = (2, 4, 3, 3);
    for reverse in [false, true] {
        let mut params = lstm_params(&mut rng, d, h, 0.7);
        params.insert(0, rand_tensor(&mut rng, &[b, k, d], 1.0));
        let w = proj(&mut rng, b * k * h);
        let r = grad_check(&params, 10_000, 0, |t, v| {
            let y = t.lstm(v[0], v[1], v[2], v[3], v[4], reverse)?;
            t.weighted_sum(y, &w)
        })
        .unwrap();
        assert!(r.max_rel_error < TOL, "reverse={reverse}: {r:?}");
    }
}

#[test]
fn bce_values_and_gradient() {
    let mut tape = Tape::<f64>::new();
    let z = tape.param(Tensor::zeros(&[1, 3, 1]));
    let l = tape.bce_with_logits(z, &[0, 1, 1], 3).unwrap();
    assert!((tape.value(l).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);
    let z2 = tape.param(Tensor::full(&[1, 1, 1], 20.0));
    let l2 = tape.bce_with_logits(z2, &[1], 1).unwrap();
    assert!(tape.value(l2).data()[0] < 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = vec![rand_tensor(&mut rng, &[2, 6, 1], 4.0)];
    let targets: Vec<u8> = (0..8).map(|i| (i % 3 == 0) as u8).collect();
    let r = grad_check(&params, 100, 0, |t, v| t.bce_with_logits(v[0], &targets, 4)).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
    // direct reference: -[y ln s + (1-y) ln(1-s)]
    let mut tape = Tape::<f64>::new();
    let z = tape.constant(params[0].clone());
    let l = tape.bce_with_logits(z, &targets, 4).unwrap();
    let mut want = 0.0;
    for b in 0..2 {
        for t in 0..4 {
            let x = params[0].data()[b * 6 + t];
            let s = 1.0 / (1.0 + (-x).exp());
            let y = targets[b * 4 + t] as f64;
            want -= y * s.ln() + (1.0 - y) * (1.0 - s).ln();
        }
    }
    assert!((tape.value(l).data()[0] - want / 8.0).abs() < 1e-6);
}

#[test]
fn linear_function_checks_to_1e9() {
    let params = vec![Tensor::from_fn(&[6], |i| i as f64 - 2.5)];
    let w: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 1.0).collect();
    let r = grad_check(&params, 100, 0, |t, v| t.weighted_sum(v[0], &w)).unwrap();
    assert!(r.max_rel_error <= 1e-9, "{r:?}");
}

#[test]
fn corrupted_gradient_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = vec![rand_tensor(&mut rng, &[3, 3], 1.0)];
    let f = |t: &mut Tape<f64>, v: &[DiffArray]| {
        let y = t.tanh(v[0]);
        t.sum(y)
    };
    let mut tape = Tape::new();
    let p = tape.param(params[0].clone());
    let out = f(&mut tape, &[p]).unwrap();
    let mut g = tape.backward(out).unwrap().take(p).unwrap();
    g.data_mut()[4] *= 1.1;
    let r = compare_gradients(&params, &[g], 100, 0, f).unwrap();
    assert!(r.max_rel_error >= 1e-2, "{r:?}");
    assert_eq!(r.worst, Some((0, 4)));
}

#[test]
fn shared_leaf_receives_summed_gradients() {
    // y = tanh(W x1) + tanh(W x2) with one W, against two untied copies.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let w0 = rand_tensor(&mut rng, &[2, 3], 1.0);
    let x1 = rand_tensor(&mut rng, &[4, 3], 1.0);
    let x2 = rand_tensor(&mut rng, &[4, 3], 1.0);
    let run = |tied: bool| {
        let mut t = Tape::<f64>::new();
        let wa = t.param(w0.clone());
        let wb = if tied { wa } else { t.param(w0.clone()) };
        let a = t.constant(x1.clone());
        let b = t.constant(x2.clone());
        let ya = t.affine(a, wa, None).unwrap();
        let yb = t.affine(b, wb, None).unwrap();
        let ya = t.tanh(ya);
        let yb = t.tanh(yb);
        let s = t.add(ya, yb).unwrap();
        let s = t.sum(s).unwrap();
        let g = t.backward(s).unwrap();
        if tied {
            g.get(wa).unwrap().clone()
        } else {
            let mut sum = g.get(wa).unwrap().clone();
            sum.add_assign(g.get(wb).unwrap());
            sum
        }
    };
    let tied = run(true);
    let untied = run(false);
    for (a, b) in tied.data().iter().zip(untied.data()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn backward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = lstm_params(&mut rng, 2, 4, 0.5);
    let x = rand_tensor(&mut rng, &[3, 6, 2], 1.0);
    let run = || {
        let mut t = Tape::<f32>::new();
        let xv = t.constant(x.cast());
        let v: Vec<DiffArray> = p.iter().map(|q| t.param(q.cast())).collect();
        let y = t.lstm(xv, v[0], v[1], v[2], v[3], false).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        v.iter().map(|&q| g.get(q).unwrap().clone()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
