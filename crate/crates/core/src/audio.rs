//! Multi-channel waveforms, WAV I/O, normalization and positive-pair cropping.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sample rate every source is brought to before simulation and feature extraction.
pub const WORKING_RATE: u32 = 16_000;

/// Number of taps of the windowed-sinc resampling kernel.
pub const RESAMPLE_TAPS: usize = 64;

/// An `M`-channel time-domain signal. All channels share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelWaveform {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultiChannelWaveform {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Size("waveform needs at least one channel".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        let n = channels[0].len();
        if let Some(bad) = channels.iter().position(|c| c.len() != n) {
            return Err(Error::Size(format!(
                "channel {bad} has {} samples, channel 0 has {n}",
                channels[bad].len()
            )));
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("waveform contains non-finite samples".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn zeros(n_channels: usize, n_samples: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; n_samples]; n_channels.max(1)],
            sample_rate,
        }
    }

    /// Single-channel waveform.
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Largest absolute sample over all channels.
    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|x| x * gain).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Samples `[start, start + len)` of every channel; positions past the end read as zero.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let mut out = vec![0.0; len];
                if start < c.len() {
                    let end = (start + len).min(c.len());
                    out[..end - start].copy_from_slice(&c[start..end]);
                }
                out
            })
            .collect();
        Self {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    /// Average of all channels.
    pub fn mixdown(&self) -> Vec<f64> {
        let m = self.n_channels() as f64;
        (0..self.len())
            .map(|n| self.channels.iter().map(|c| c[n]).sum::<f64>() / m)
            .collect()
    }

    pub(crate) fn from_parts_unchecked(channels: Vec<Vec<f64>>, sample_rate: u32) -> Self {
        debug_assert!(!channels.is_empty());
        Self {
            channels,
            sample_rate,
        }
    }
}

/// Identifier of the recording a patch was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceId(pub u64);

/// A one-second crop of a recording. Two patches with equal `source_id` are a positive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub waveform: MultiChannelWaveform,
    pub source_id: SourceId,
}

/// Reads a RIFF WAV file (PCM 16/24/32-bit or 32-bit float) and scales samples to `[-1, 1]`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<MultiChannelWaveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let m = spec.channels as usize;
    if m == 0 {
        return Err(Error::Format {
            path: path.into(),
            reason: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::Unsupported(format!(
                "{}: {bits}-bit {fmt:?} samples",
                path.display()
            )))
        }
    };
    let n = interleaved.len() / m;
    let mut channels = vec![Vec::with_capacity(n); m];
    for frame in interleaved.chunks_exact(m) {
        for (c, &x) in frame.iter().enumerate() {
            channels[c].push(x);
        }
    }
    MultiChannelWaveform::new(channels, spec.sample_rate)
}

/// Writes a 32-bit float WAV. Loading the file back with [`load_wav`] returns the
/// same samples whenever they are representable as `f32`.
pub fn save_wav(w: &MultiChannelWaveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: w.n_channels() as u16,
        sample_rate: w.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for n in 0..w.len() {
        for c in w.channels() {
            writer
                .write_sample(c[n] as f32)
                .map_err(|e| map_hound(path, e))?;
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::Unsupported => Error::Unsupported(format!("{}: encoding", path.display())),
        other => Error::Format {
            path: path.into(),
            reason: other.to_string(),
        },
    }
}

/// Scales all channels by one common gain so the overall peak equals `target_peak`.
/// An all-zero waveform is returned unchanged.
pub fn peak_normalize(w: &MultiChannelWaveform, target_peak: f64) -> MultiChannelWaveform {
    let peak = w.peak();
    if peak == 0.0 {
        return w.clone();
    }
    w.scaled(target_peak / peak)
}

/// Band-limited resampling with a Hann-windowed sinc kernel of [`RESAMPLE_TAPS`] taps.
pub fn resample(w: &MultiChannelWaveform, target_rate: u32) -> MultiChannelWaveform {
    if w.sample_rate() == target_rate {
        return w.clone();
    }
    let ratio = target_rate as f64 / w.sample_rate() as f64;
    let cutoff = ratio.min(1.0);
    let half = (RESAMPLE_TAPS / 2) as isize;
    let n_out = (w.len() as f64 * ratio).round() as usize;
    let channels = w
        .channels()
        .iter()
        .map(|src| {
            (0..n_out)
                .map(|n| {
                    let t = n as f64 / ratio;
                    let k0 = t.floor() as isize;
                    let mut acc = 0.0;
                    for k in (k0 - half + 1)..=(k0 + half) {
                        if k < 0 || k as usize >= src.len() {
                            continue;
                        }
                        let x = t - k as f64;
                        let win = 0.5 * (1.0 + (std::f64::consts::PI * x / half as f64).cos());
                        acc += src[k as usize] * cutoff * sinc(cutoff * x) * win;
                    }
                    acc
                })
                .collect()
        })
        .collect();
    MultiChannelWaveform::from_parts_unchecked(channels, target_rate)
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Number of samples in a one-second patch at `sample_rate`.
pub fn patch_len(sample_rate: u32) -> usize {
    sample_rate as usize
}

/// Number of distinct patch offsets for a recording of `n` samples.
pub fn crop_offsets(n: usize, patch: usize) -> usize {
    n.saturating_sub(patch) + 1
}

/// One-second crop starting at `offset`; zero-padded at the end when the recording is short.
pub fn crop_at(w: &MultiChannelWaveform, offset: usize, source_id: SourceId) -> Patch {
    Patch {
        waveform: w.window(offset, patch_len(w.sample_rate())),
        source_id,
    }
}

/// Centered one-second crop (used for deterministic evaluation).
pub fn center_crop(w: &MultiChannelWaveform, source_id: SourceId) -> Patch {
    let offsets = crop_offsets(w.len(), patch_len(w.sample_rate()));
    crop_at(w, (offsets - 1) / 2, source_id)
}

/// Two independent, uniformly positioned one-second crops of the same recording.
pub fn crop_pair(w: &MultiChannelWaveform, source_id: SourceId, rng: &mut RngStream) -> (Patch, Patch) {
    let offsets = crop_offsets(w.len(), patch_len(w.sample_rate()));
    let a = rng.below(offsets);
    let b = rng.below(offsets);
    (crop_at(w, a, source_id), crop_at(w, b, source_id))
}
