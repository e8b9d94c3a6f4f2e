use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::stft::Spectrogram;
use super::RealMatrix;
use crate::error::{Error, Result};

/// Floor on `|X_i||X_j|` in the phase transform.
pub const PHAT_EPS: f64 = 1e-12;

/// Inverse-FFT plan for turning whitened cross spectra into lag-domain correlations.
pub struct GccPlan {
    fft_size: usize,
    ifft: Arc<dyn Fft<f64>>,
}

impl GccPlan {
    pub fn new(fft_size: usize) -> Self {
        Self {
            fft_size,
            ifft: FftPlanner::new().plan_fft_inverse(fft_size),
        }
    }

    /// PHAT-weighted cross-correlation per frame, keeping `n_lags` central lags.
    ///
    /// Row `r` holds lag `r - n_lags / 2`; a positive lag means channel `i` lags channel `j`.
    pub fn run(&self, spec_i: &Spectrogram, spec_j: &Spectrogram, n_lags: usize) -> Result<RealMatrix> {
        if spec_i.n_bins != spec_j.n_bins || spec_i.n_frames != spec_j.n_frames {
            return Err(Error::Size(format!(
                "spectrogram shapes differ: {}x{} vs {}x{}",
                spec_i.n_bins, spec_i.n_frames, spec_j.n_bins, spec_j.n_frames
            )));
        }
        let n = self.fft_size;
        if spec_i.n_bins != n / 2 + 1 {
            return Err(Error::Size(format!(
                "expected {} bins for a {n}-point transform, got {}",
                n / 2 + 1,
                spec_i.n_bins
            )));
        }
        if n_lags == 0 || n_lags > n {
            return Err(Error::Size(format!("n_lags {n_lags} outside 1..={n}")));
        }
        let half = (n_lags / 2) as isize;
        let mut out = RealMatrix::zeros(n_lags, spec_i.n_frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];
        for t in 0..spec_i.n_frames {
            let (fi, fj) = (spec_i.frame(t), spec_j.frame(t));
            for k in 0..=n / 2 {
                let cross = fi[k] * fj[k].conj();
                let denom = (fi[k].norm() * fj[k].norm()).max(PHAT_EPS);
                buf[k] = cross / denom;
            }
            for k in 1..n / 2 {
                buf[n - k] = buf[k].conj();
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for r in 0..n_lags {
                let lag = r as isize - half;
                let idx = lag.rem_euclid(n as isize) as usize;
                out.set(r, t, buf[idx].re / n as f64);
            }
        }
        Ok(out)
    }
}

/// GCC-PHAT between two channels' spectrograms; see [`GccPlan::run`].
pub fn gcc_phat(spec_i: &Spectrogram, spec_j: &Spectrogram, n_lags: usize) -> Result<RealMatrix> {
    let fft_size = 2 * (spec_i.n_bins.max(1) - 1);
    if fft_size == 0 {
        return Err(Error::Size("empty spectrogram".into()));
    }
    GccPlan::new(fft_size).run(spec_i, spec_j, n_lags)
}

/// Lag of the largest value in frame `t` of a GCC matrix.
pub fn argmax_lag(gcc: &RealMatrix, t: usize) -> isize {
    let half = (gcc.rows / 2) as isize;
    let mut best = 0;
    for r in 1..gcc.rows {
        if gcc.get(r, t) > gcc.get(best, t) {
            best = r;
        }
    }
    best as isize - half
}
