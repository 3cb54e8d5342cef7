use num_complex::Complex;
use rand::Rng;

use super::linalg::CMatrix;
use super::noise::{complex_gaussian, NoiseSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Regularization added to the MMSE Gram matrix.
pub const MMSE_LAMBDA: f64 = 1e-6;

/// Frequency-selective MIMO channel for one code block.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    taps: Vec<CMatrix<T>>,
    freq: Vec<CMatrix<T>>,
}

impl<T: Real> ChannelRealization<T> {
    /// Builds a realization from explicit time-domain taps; `H_f[k] =
    /// sum_l h_l exp(-j 2 pi k l / n_fft)`.
    pub fn from_taps(taps: Vec<CMatrix<T>>, n_fft: usize) -> Result<Self> {
        let Some(first) = taps.first() else {
            return Err(Error::Shape("channel needs at least one tap".into()));
        };
        let (nr, nt) = (first.rows(), first.cols());
        if taps.iter().any(|t| t.rows() != nr || t.cols() != nt) {
            return Err(Error::Shape("taps have differing dimensions".into()));
        }
        if n_fft == 0 || taps.len() > n_fft {
            return Err(Error::Shape(format!("{} taps do not fit an FFT of size {n_fft}", taps.len())));
        }
        let freq = (0..n_fft)
            .map(|k| {
                let mut h = CMatrix::zeros(nr, nt);
                for (l, tap) in taps.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * ((k * l) % n_fft) as f64 / n_fft as f64;
                    let w = Complex::new(T::lit(ph.cos()), T::lit(ph.sin()));
                    for r in 0..nr {
                        for c in 0..nt {
                            h[(r, c)] += tap[(r, c)] * w;
                        }
                    }
                }
                h
            })
            .collect();
        Ok(Self { taps, freq })
    }

    /// Independent `CN(0, 1/L)` entries on each of `l` taps, so the tap
    /// powers sum to one.
    pub fn random<R: Rng + ?Sized>(n_r: usize, n_t: usize, l: usize, n_fft: usize, rng: &mut R) -> Result<Self> {
        if l == 0 {
            return Err(Error::Shape("channel needs at least one tap".into()));
        }
        let var = 1.0 / l as f64;
        let taps = (0..l)
            .map(|_| CMatrix::from_fn(n_r, n_t, |_, _| complex_gaussian(rng, var)))
            .collect();
        Self::from_taps(taps, n_fft)
    }

    pub fn taps(&self) -> &[CMatrix<T>] {
        &self.taps
    }
    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }
    pub fn n_fft(&self) -> usize {
        self.freq.len()
    }
    pub fn n_r(&self) -> usize {
        self.taps[0].rows()
    }
    pub fn n_t(&self) -> usize {
        self.taps[0].cols()
    }
    /// Frequency response on subcarrier `k`.
    pub fn subcarrier(&self, k: usize) -> &CMatrix<T> {
        &self.freq[k]
    }
}

/// Passes per-antenna symbol streams through the channel. Symbol `t` of
/// every stream rides subcarrier `t mod n_fft`; returns one stream per
/// receive antenna.
pub fn rayleigh_mimo<T: Real, R: Rng + ?Sized>(
    symbols: &[Vec<Complex<T>>],
    realization: &ChannelRealization<T>,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<Vec<Complex<T>>>> {
    let nt = realization.n_t();
    if symbols.len() != nt {
        return Err(Error::Shape(format!("{} transmit streams for {nt} antennas", symbols.len())));
    }
    let n = symbols[0].len();
    if symbols.iter().any(|s| s.len() != n) {
        return Err(Error::Shape("transmit streams differ in length".into()));
    }
    let nr = realization.n_r();
    let mut out = vec![Vec::with_capacity(n); nr];
    let mut x = vec![Complex::new(T::zero(), T::zero()); nt];
    for t in 0..n {
        for (a, s) in symbols.iter().enumerate() {
            x[a] = s[t];
        }
        let y = realization.subcarrier(t % realization.n_fft()).matvec(&x)?;
        for (r, v) in y.into_iter().enumerate() {
            let nz = if noise.sigma2 > 0.0 {
                complex_gaussian(rng, noise.sigma2)
            } else {
                Complex::new(T::zero(), T::zero())
            };
            out[r].push(v + nz);
        }
    }
    Ok(out)
}

/// Orthogonal pilot matrix with unit-modulus entries `exp(-j 2 pi r c / n)`.
/// Divided by `sqrt(n)` it is the unitary DFT matrix.
pub fn dft_pilots<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |r, c| {
        let ph = -2.0 * std::f64::consts::PI * ((r * c) % n) as f64 / n as f64;
        Complex::new(T::lit(ph.cos()), T::lit(ph.sin()))
    })
}

/// Least-squares estimate `H = Y pinv(Omega)`, `pinv(Omega) = (Omega^H Omega)^-1 Omega^H`.
pub fn ls_estimate<T: Real>(received: &CMatrix<T>, pilots: &CMatrix<T>) -> Result<CMatrix<T>> {
    if pilots.rows() != pilots.cols() {
        return Err(Error::Estimation(format!(
            "pilot matrix must be square, got {}x{}",
            pilots.rows(),
            pilots.cols()
        )));
    }
    if received.cols() != pilots.cols() {
        return Err(Error::Shape(format!(
            "received pilots have {} slots, pilot matrix has {}",
            received.cols(),
            pilots.cols()
        )));
    }
    let oh = pilots.hermitian();
    let gram = oh.matmul(pilots)?;
    let inv = gram
        .inverse()
        .map_err(|_| Error::Estimation("pilot matrix is singular".into()))?;
    received.matmul(&inv.matmul(&oh)?)
}

/// Sends the pilot block on every subcarrier and returns the LS estimate of
/// each `H_f[k]`.
pub fn estimate_channel<T: Real, R: Rng + ?Sized>(
    realization: &ChannelRealization<T>,
    pilots: &CMatrix<T>,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<CMatrix<T>>> {
    (0..realization.n_fft())
        .map(|k| {
            let mut y = realization.subcarrier(k).matmul(pilots)?;
            if noise.sigma2 > 0.0 {
                for r in 0..y.rows() {
                    for c in 0..y.cols() {
                        y[(r, c)] += complex_gaussian(rng, noise.sigma2);
                    }
                }
            }
            ls_estimate(&y, pilots)
        })
        .collect()
}

/// The MMSE equalizer `W`, of shape `N_T x N_R`: the first `N_R` columns of
/// `(Hb^H Hb + lambda I)^-1 Hb^H` with `Hb = [H; sigma2 I]`.
pub fn mmse_matrix<T: Real>(h: &CMatrix<T>, sigma2: T) -> Result<CMatrix<T>> {
    let nt = h.cols();
    let nr = h.rows();
    let lower = CMatrix::identity(nt).scale(Complex::new(sigma2, T::zero()));
    let hbar = h.vstack(&lower)?;
    let hh = hbar.hermitian();
    let gram = hh
        .matmul(&hbar)?
        .add(&CMatrix::identity(nt).scale(Complex::new(T::lit(MMSE_LAMBDA), T::zero())))?;
    let w = gram.inverse()?.matmul(&hh)?;
    Ok(w.left_columns(nr))
}

pub fn mmse_detect<T: Real>(y: &[Complex<T>], h: &CMatrix<T>, sigma2: T) -> Result<Vec<Complex<T>>> {
    mmse_matrix(h, sigma2)?.matvec(y)
}

/// Equalizes per-antenna received streams with the per-subcarrier
/// estimates, returning per-transmit-antenna symbol estimates.
pub fn mmse_equalize<T: Real>(
    received: &[Vec<Complex<T>>],
    estimates: &[CMatrix<T>],
    sigma2: T,
) -> Result<Vec<Vec<Complex<T>>>> {
    let Some(h0) = estimates.first() else {
        return Err(Error::Shape("no channel estimates".into()));
    };
    if received.len() != h0.rows() {
        return Err(Error::Shape(format!("{} receive streams for {} antennas", received.len(), h0.rows())));
    }
    let ws = estimates.iter().map(|h| mmse_matrix(h, sigma2)).collect::<Result<Vec<_>>>()?;
    let n = received[0].len();
    let mut out = vec![Vec::with_capacity(n); h0.cols()];
    let mut y = vec![Complex::new(T::zero(), T::zero()); received.len()];
    for t in 0..n {
        for (r, s) in received.iter().enumerate() {
            y[r] = s[t];
        }
        for (a, v) in ws[t % ws.len()].matvec(&y)?.into_iter().enumerate() {
            out[a].push(v);
        }
    }
    Ok(out)
}
