//! Log-Mel and GCC-PHAT feature extraction.
//!
//! A patch with `M` microphones becomes a [`FeatureStack`] of `M + M(M-1)/2`
//! channels, each `F × T`: one log-Mel spectrogram per microphone followed by
//! one GCC-PHAT map per microphone pair in lexicographic order. The GCC lag
//! axis is truncated to `F` central lags so both kinds share a shape.

pub mod gcc;
pub mod mel;
pub mod stft;

use std::io::{Read, Write};
use std::path::Path;

pub use gcc::{argmax_lag, gcc_phat, GccPlan, PHAT_EPS};
pub use mel::{log_mel, MelConfig, MelFilterbank, LOG_EPS};
pub use stft::{stft, Spectrogram, StftConfig, StftPlan};

use crate::audio::Patch;
use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// What a feature channel encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelRole {
    Mel(usize),
    Gcc(usize, usize),
}

/// Microphone pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn mic_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect()
}

/// Channel roles of a stack built from `m` microphones.
pub fn stack_roles(m: usize) -> Vec<ChannelRole> {
    (0..m)
        .map(ChannelRole::Mel)
        .chain(mic_pairs(m).into_iter().map(|(i, j)| ChannelRole::Gcc(i, j)))
        .collect()
}

/// `C × F × T` feature tensor fed to the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    data: Vec<f32>,
    n_freq: usize,
    n_frames: usize,
    roles: Vec<ChannelRole>,
}

impl FeatureStack {
    pub fn new(data: Vec<f32>, n_freq: usize, n_frames: usize, roles: Vec<ChannelRole>) -> Result<Self> {
        if data.len() != roles.len() * n_freq * n_frames {
            return Err(Error::Size(format!(
                "{} values for a {}x{}x{} stack",
                data.len(),
                roles.len(),
                n_freq,
                n_frames
            )));
        }
        let first_gcc = roles
            .iter()
            .position(|r| matches!(r, ChannelRole::Gcc(..)))
            .unwrap_or(roles.len());
        if roles[first_gcc..]
            .iter()
            .any(|r| matches!(r, ChannelRole::Mel(_)))
        {
            return Err(Error::Data("Mel channels must precede GCC channels".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("feature stack has non-finite values".into()));
        }
        Ok(Self {
            data,
            n_freq,
            n_frames,
            roles,
        })
    }

    pub fn zeros(roles: Vec<ChannelRole>, n_freq: usize, n_frames: usize) -> Self {
        Self {
            data: vec![0.0; roles.len() * n_freq * n_frames],
            n_freq,
            n_frames,
            roles,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.roles.len()
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// `(C, F, T)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.roles.len(), self.n_freq, self.n_frames)
    }

    pub fn roles(&self) -> &[ChannelRole] {
        &self.roles
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.n_freq * self.n_frames;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let plane = self.n_freq * self.n_frames;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, c: usize, f: usize, t: usize) -> f32 {
        self.data[(c * self.n_freq + f) * self.n_frames + t]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Writes the debug dump: `C`, `F`, `T` as little-endian `u32`, then the values as `f32`.
    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(12 + 4 * self.data.len());
        for d in [self.n_channels(), self.n_freq, self.n_frames] {
            bytes.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a dump written by [`write_dump`](Self::write_dump). Channel roles are
    /// reconstructed assuming the standard Mel-then-GCC layout.
    pub fn read_dump(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.into(),
            reason: reason.into(),
        };
        if bytes.len() < 12 {
            return Err(bad("truncated header"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let (c, f, t) = (dim(0), dim(1), dim(2));
        if bytes.len() != 12 + 4 * c * f * t {
            return Err(bad("payload length does not match header"));
        }
        let m = (0..=c).find(|m| m + m * m.saturating_sub(1) / 2 == c).ok_or_else(|| bad("channel count is not M + M(M-1)/2"))?;
        let data = bytes[12..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(data, f, t, stack_roles(m))
    }
}

/// STFT and Mel settings for stack extraction.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub mel: MelConfig,
}

/// Holds FFT plans and the filterbank so repeated extraction does no setup work.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    sample_rate: u32,
    stft: StftPlan,
    gcc: GccPlan,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig, sample_rate: u32) -> Result<Self> {
        let stft = StftPlan::new(cfg.stft)?;
        let filterbank = MelFilterbank::new(cfg.mel, cfg.stft.fft_size, sample_rate)?;
        if cfg.mel.n_mels > cfg.stft.fft_size {
            return Err(Error::Config(format!(
                "{} GCC lags exceed the {}-point transform",
                cfg.mel.n_mels, cfg.stft.fft_size
            )));
        }
        Ok(Self {
            cfg,
            sample_rate,
            stft,
            gcc: GccPlan::new(cfg.stft.fft_size),
            filterbank,
        })
    }

    pub fn config(&self) -> FeatureConfig {
        self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// `(C, F, T)` of the stack produced for `m` microphones and `n` samples.
    pub fn output_shape(&self, m: usize, n: usize) -> Option<(usize, usize, usize)> {
        let t = self.cfg.stft.n_frames(n)?;
        Some((m + m * (m - 1) / 2, self.cfg.mel.n_mels, t))
    }

    pub fn spectrograms(&self, patch: &Patch) -> Result<Vec<Spectrogram>> {
        patch
            .waveform
            .channels()
            .iter()
            .map(|c| self.stft.run(c))
            .collect()
    }

    pub fn extract(&self, patch: &Patch) -> Result<FeatureStack> {
        if patch.waveform.sample_rate() != self.sample_rate {
            return Err(Error::Data(format!(
                "patch at {} Hz, extractor configured for {} Hz",
                patch.waveform.sample_rate(),
                self.sample_rate
            )));
        }
        let specs = self.spectrograms(patch)?;
        let m = specs.len();
        let f = self.cfg.mel.n_mels;
        let t = specs[0].n_frames;
        let roles = stack_roles(m);
        let mut data = Vec::with_capacity(roles.len() * f * t);
        for s in &specs {
            data.extend(log_mel(s, &self.filterbank)?.data.iter().map(|&v| v as f32));
        }
        for (i, j) in mic_pairs(m) {
            let g = self.gcc.run(&specs[i], &specs[j], f)?;
            data.extend(g.data.iter().map(|&v| v as f32));
        }
        FeatureStack::new(data, f, t, roles)
    }
}

/// Builds the Mel + GCC feature stack of one patch.
pub fn extract_stack(p: &Patch, cfg: FeatureConfig) -> Result<FeatureStack> {
    FeatureExtractor::new(cfg, p.waveform.sample_rate())?.extract(p)
}
