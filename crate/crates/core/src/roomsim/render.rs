use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::ism::{simulate_rir_with, IsmOptions, Rir};
use super::{ArrayGeometry, RoomScene};
use crate::audio::{peak_normalize, MultiChannelWaveform};
use crate::error::{Error, Result};

/// Peak level of rendered scenes.
pub const RENDER_PEAK: f64 = 0.9;

/// Linear convolution via zero-padded FFTs; output length `a.len() + b.len() - 1`.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (d, &s) in buf.iter_mut().zip(x) {
            d.re = s;
        }
        buf
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa[..out_len].iter().map(|c| c.re / n as f64).collect()
}

/// Convolves a mono source with each microphone's response, without normalization.
pub fn convolve_rir(rir: &Rir, source: &[f64]) -> MultiChannelWaveform {
    let channels = rir.taps.iter().map(|h| fft_convolve(source, h)).collect();
    MultiChannelWaveform::from_parts_unchecked(channels, rir.sample_rate)
}

/// Renders a mono source into the scene and peak-normalizes the result to [`RENDER_PEAK`].
pub fn render_scene(scene: &RoomScene, geom: &ArrayGeometry, source: &MultiChannelWaveform) -> Result<MultiChannelWaveform> {
    render_scene_with(scene, geom, source, IsmOptions::default())
}

pub fn render_scene_with(
    scene: &RoomScene,
    geom: &ArrayGeometry,
    source: &MultiChannelWaveform,
    opts: IsmOptions,
) -> Result<MultiChannelWaveform> {
    if source.n_channels() != 1 {
        return Err(Error::Data(format!(
            "source must be mono, got {} channels",
            source.n_channels()
        )));
    }
    if source.sample_rate() != opts.sample_rate {
        return Err(Error::Data(format!(
            "source at {} Hz, simulation at {} Hz",
            source.sample_rate(),
            opts.sample_rate
        )));
    }
    let rir = simulate_rir_with(scene, geom, opts);
    Ok(peak_normalize(&convolve_rir(&rir, source.channel(0)), RENDER_PEAK))
}
