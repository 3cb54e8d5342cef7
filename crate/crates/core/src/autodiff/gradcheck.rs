use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{DiffArray, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Finite-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Worst disagreement between analytic and numerical gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter, element)` of the worst probe.
    pub worst: Option<(usize, usize)>,
    pub probes: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn evaluate<F>(params: &[Tensor<f64>], f: &F) -> Result<(f64, Tape<f64>, DiffArray, Vec<DiffArray>)>
where
    F: Fn(&mut Tape<f64>, &[DiffArray]) -> Result<DiffArray>,
{
    let mut tape = Tape::new();
    let vars: Vec<DiffArray> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::Shape("gradient check needs a scalar function".into()));
    }
    Ok((tape.value(out).data()[0], tape, out, vars))
}

/// Compares the tape's gradients of the scalar `f` with central
/// differences on up to `probes` coordinates (all of them if there are
/// fewer), chosen with `seed`.
pub fn grad_check<F>(params: &[Tensor<f64>], probes: usize, seed: u64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[DiffArray]) -> Result<DiffArray>,
{
    let (_, tape, out, vars) = evaluate(params, &f)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    compare_gradients(params, &analytic, probes, seed, f)
}

/// The numerical half of [`grad_check`], against caller-supplied analytic
/// gradients.
pub fn compare_gradients<F>(
    params: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    probes: usize,
    seed: u64,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[DiffArray]) -> Result<DiffArray>,
{
    let total: usize = params.iter().map(|p| p.len()).sum();
    let coords: Vec<(usize, usize)> = if total <= probes {
        params
            .iter()
            .enumerate()
            .flat_map(|(i, p)| (0..p.len()).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..probes)
            .map(|_| {
                let mut r = rng.random_range(0..total);
                let mut i = 0;
                while r >= params[i].len() {
                    r -= params[i].len();
                    i += 1;
                }
                (i, r)
            })
            .collect()
    };
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        probes: coords.len(),
    };
    for (i, j) in coords {
        let orig = work[i].data()[j];
        work[i].data_mut()[j] = orig + GRAD_CHECK_STEP;
        let up = evaluate(&work, &f)?.0;
        work[i].data_mut()[j] = orig - GRAD_CHECK_STEP;
        let down = evaluate(&work, &f)?.0;
        work[i].data_mut()[j] = orig;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let err = relative_error(analytic[i].data()[j], numeric);
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((i, j));
        }
    }
    Ok(report)
}
