use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::rng::RngStream;

/// Window draws before giving up and returning the input unchanged.
pub const RRC_MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrcParams {
    pub scale_range: (f64, f64),
    pub aspect_range: (f64, f64),
}

impl Default for RrcParams {
    fn default() -> Self {
        Self {
            scale_range: (0.8, 1.0),
            aspect_range: (0.8, 1.25),
        }
    }
}

impl RrcParams {
    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.scale_range;
        let (a0, a1) = self.aspect_range;
        if !(s0 > 0.0 && s0 <= s1 && s1 <= 1.0) {
            return Err(Error::Config(format!("crop scale range [{s0}, {s1}] not inside (0, 1]")));
        }
        if !(a0 > 0.0 && a0 <= a1) {
            return Err(Error::Config(format!("crop aspect range [{a0}, {a1}] invalid")));
        }
        Ok(())
    }
}

/// Crop rectangle in bins: rows `freq_start..freq_start + height`, columns
/// `time_start..time_start + width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub freq_start: usize,
    pub time_start: usize,
    pub height: usize,
    pub width: usize,
}

impl CropWindow {
    pub fn full(n_freq: usize, n_frames: usize) -> Self {
        Self {
            freq_start: 0,
            time_start: 0,
            height: n_freq,
            width: n_frames,
        }
    }
}

fn draw(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.uniform(lo, hi)
    } else {
        lo
    }
}

/// Draws a window covering a `scale_range` fraction of the `F × T` area. The
/// aspect ratio (log-uniform in `aspect_range`) is relative to the grid's own
/// shape, so scale 1 with aspect 1 is the full frame. `None` after
/// [`RRC_MAX_ATTEMPTS`] degenerate draws.
pub fn sample_window(n_freq: usize, n_frames: usize, params: &RrcParams, rng: &mut RngStream) -> Option<CropWindow> {
    for _ in 0..RRC_MAX_ATTEMPTS {
        let scale = draw(rng, params.scale_range.0, params.scale_range.1);
        let ratio = draw(rng, params.aspect_range.0.ln(), params.aspect_range.1.ln()).exp();
        let width = ((n_frames as f64 * (scale * ratio).sqrt()).round() as usize).min(n_frames);
        let height = ((n_freq as f64 * (scale / ratio).sqrt()).round() as usize).min(n_freq);
        if width < 2 || height < 2 {
            continue;
        }
        let freq_start = rng.below(n_freq - height + 1);
        let time_start = rng.below(n_frames - width + 1);
        return Some(CropWindow {
            freq_start,
            time_start,
            height,
            width,
        });
    }
    None
}

/// Bilinear resize of `window` back to the full `F × T` grid on every channel.
/// Corner bins map to corner bins, so the full window is an exact identity.
pub fn resize_crop(stack: &FeatureStack, window: &CropWindow) -> Result<FeatureStack> {
    let (c, f, t) = stack.shape();
    if window.height < 1
        || window.width < 1
        || window.freq_start + window.height > f
        || window.time_start + window.width > t
    {
        return Err(Error::Size(format!("crop window {window:?} outside {f}x{t}")));
    }
    let axis = |n_out: usize, start: usize, len: usize| -> Vec<(usize, usize, f32)> {
        let step = if n_out > 1 { (len - 1) as f64 / (n_out - 1) as f64 } else { 0.0 };
        (0..n_out)
            .map(|i| {
                let pos = start as f64 + i as f64 * step;
                let lo = (pos.floor() as usize).min(start + len - 1);
                let hi = (lo + 1).min(start + len - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let rows = axis(f, window.freq_start, window.height);
    let cols = axis(t, window.time_start, window.width);
    let mut out = FeatureStack::zeros(stack.roles().to_vec(), f, t);
    for ch in 0..c {
        let src = stack.channel(ch);
        let dst = out.channel_mut(ch);
        for (i, &(r0, r1, fr)) in rows.iter().enumerate() {
            for (j, &(c0, c1, fc)) in cols.iter().enumerate() {
                let top = src[r0 * t + c0] + fc * (src[r0 * t + c1] - src[r0 * t + c0]);
                let bottom = src[r1 * t + c0] + fc * (src[r1 * t + c1] - src[r1 * t + c0]);
                dst[i * t + j] = top + fr * (bottom - top);
            }
        }
    }
    Ok(out)
}

/// Random resized crop with the sampled window (`None` when the input was returned unchanged).
pub fn random_resized_crop_with_window(
    stack: &FeatureStack,
    rng: &mut RngStream,
    params: &RrcParams,
) -> Result<(FeatureStack, Option<CropWindow>)> {
    match sample_window(stack.n_freq(), stack.n_frames(), params, rng) {
        Some(w) => Ok((resize_crop(stack, &w)?, Some(w))),
        None => Ok((stack.clone(), None)),
    }
}

/// Crops one random window, shared by all channels, and resizes it back to `F × T`.
pub fn random_resized_crop(stack: &FeatureStack, rng: &mut RngStream, params: &RrcParams) -> Result<FeatureStack> {
    Ok(random_resized_crop_with_window(stack, rng, params)?.0)
}
