use super::stft::Spectrogram;
use super::RealMatrix;
use crate::error::{Error, Result};

/// Floor added to Mel energies before the logarithm.
pub const LOG_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 64,
            f_min: 50.0,
            f_max: 8000.0,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got {}..{}",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-scale filterbank, `n_mels` rows over the one-sided FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: MelConfig, fft_size: usize, sample_rate: u32) -> Result<Self> {
        cfg.validate(sample_rate)?;
        let n_bins = fft_size / 2 + 1;
        let lo = hz_to_mel(cfg.f_min);
        let hi = hz_to_mel(cfg.f_max);
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut weights = vec![0.0; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
        }
        Ok(Self {
            n_mels: cfg.n_mels,
            n_bins,
            weights,
            centers_hz: edges[1..=cfg.n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }
}

/// Log of the filterbank-weighted power spectrum, shape `[n_mels × n_frames]`.
pub fn log_mel(spec: &Spectrogram, fb: &MelFilterbank) -> Result<RealMatrix> {
    if spec.n_bins != fb.n_bins {
        return Err(Error::Size(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.n_bins, fb.n_bins
        )));
    }
    let mut out = RealMatrix::zeros(fb.n_mels, spec.n_frames);
    let mut power = vec![0.0; spec.n_bins];
    for t in 0..spec.n_frames {
        for (p, c) in power.iter_mut().zip(spec.frame(t)) {
            *p = c.norm_sqr();
        }
        for m in 0..fb.n_mels {
            let e: f64 = fb.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
            out.set(m, t, (e + LOG_EPS).ln());
        }
    }
    Ok(out)
}
