use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Short-time Fourier transform settings. The window is a periodic Hann of `fft_size`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop_size: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop_size: 160,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Config(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if self.hop_size == 0 || self.hop_size > self.fft_size {
            return Err(Error::Config(format!(
                "hop_size {} must lie in 1..={}",
                self.hop_size, self.fft_size
            )));
        }
        Ok(())
    }

    /// One-sided bin count, `fft_size / 2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for `n` input samples, or `None` if `n < fft_size`.
    pub fn n_frames(&self, n: usize) -> Option<usize> {
        (n >= self.fft_size).then(|| (n - self.fft_size) / self.hop_size + 1)
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.fft_size as f64;
        (0..self.fft_size)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n).cos())
            .collect()
    }
}

/// One-sided complex spectrogram stored frame-major: `data[t * n_bins + f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn at(&self, f: usize, t: usize) -> Complex64 {
        self.data[t * self.n_bins + f]
    }
}

/// Reusable STFT plan.
pub struct StftPlan {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        Ok(Self {
            window: cfg.window(),
            cfg,
            fft,
        })
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn run(&self, channel: &[f64]) -> Result<Spectrogram> {
        let n_frames = self.cfg.n_frames(channel.len()).ok_or_else(|| {
            Error::Size(format!(
                "signal of {} samples is shorter than one {}-sample frame",
                channel.len(),
                self.cfg.fft_size
            ))
        })?;
        let n_bins = self.cfg.n_bins();
        let mut data = Vec::with_capacity(n_frames * n_bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.cfg.fft_size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let start = t * self.cfg.hop_size;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(channel[start + i] * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..n_bins]);
        }
        Ok(Spectrogram {
            n_bins,
            n_frames,
            data,
        })
    }
}

/// Hann-windowed, hop-spaced one-sided STFT of a single channel.
pub fn stft(channel: &[f64], cfg: StftConfig) -> Result<Spectrogram> {
    StftPlan::new(cfg)?.run(channel)
}
