use crate::audio::{peak_normalize, MultiChannelWaveform};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixupParams {
    pub alpha_range: (f64, f64),
}

impl Default for MixupParams {
    fn default() -> Self {
        Self { alpha_range: (0.0, 0.01) }
    }
}

impl MixupParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_range;
        if !(0.0..1.0).contains(&lo) || !(0.0..1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!("mixup alpha range [{lo}, {hi}] not inside [0, 1)")));
        }
        Ok(())
    }

    pub fn sample_alpha(&self, rng: &mut RngStream) -> f64 {
        let (lo, hi) = self.alpha_range;
        if hi > lo {
            rng.uniform(lo, hi)
        } else {
            lo
        }
    }
}

fn check_shapes(x: &MultiChannelWaveform, y: &MultiChannelWaveform) -> Result<()> {
    if x.n_channels() != y.n_channels() || x.len() != y.len() || x.sample_rate() != y.sample_rate() {
        return Err(Error::Size(format!(
            "mixup of {}x{} @ {} Hz with {}x{} @ {} Hz",
            x.n_channels(),
            x.len(),
            x.sample_rate(),
            y.n_channels(),
            y.len(),
            y.sample_rate()
        )));
    }
    Ok(())
}

/// `(1 − α)·x̂ + α·ŷ` where `x̂`, `ŷ` are the inputs peak-normalized to 1.
pub fn mix_normalized(x: &MultiChannelWaveform, y: &MultiChannelWaveform, alpha: f64) -> Result<MultiChannelWaveform> {
    check_shapes(x, y)?;
    let xn = peak_normalize(x, 1.0);
    let yn = peak_normalize(y, 1.0);
    let channels = xn
        .channels()
        .iter()
        .zip(yn.channels())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (1.0 - alpha) * p + alpha * q).collect())
        .collect();
    Ok(MultiChannelWaveform::from_parts_unchecked(channels, x.sample_rate()))
}

/// Mixes a small amount of `y` into `x` and restores `x`'s original peak.
pub fn mixup(x: &MultiChannelWaveform, y: &MultiChannelWaveform, alpha: f64, params: &MixupParams) -> Result<MultiChannelWaveform> {
    let (lo, hi) = params.alpha_range;
    if !(lo..=hi).contains(&alpha) {
        return Err(Error::Config(format!("mixup alpha {alpha} outside [{lo}, {hi}]")));
    }
    let mixed = mix_normalized(x, y, alpha)?;
    Ok(peak_normalize(&mixed, x.peak()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(seed: u64, gain: f64) -> MultiChannelWaveform {
        let mut rng = RngStream::new(seed);
        let ch = (0..4).map(|_| (0..400).map(|_| gain * rng.gaussian()).collect()).collect();
        MultiChannelWaveform::new(ch, 16000).unwrap()
    }

    fn max_diff(a: &MultiChannelWaveform, b: &MultiChannelWaveform) -> f64 {
        a.channels()
            .iter()
            .flatten()
            .zip(b.channels().iter().flatten())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_alpha_round_trips() {
        let (x, y) = (wave(1, 0.3), wave(2, 2.0));
        let out = mixup(&x, &y, 0.0, &MixupParams::default()).unwrap();
        assert!(max_diff(&out, &x) < 1e-9);
    }

    #[test]
    fn self_mix_is_identity() {
        let x = wave(3, 0.7);
        let out = mixup(&x, &x, 0.01, &MixupParams::default()).unwrap();
        assert!(max_diff(&out, &x) < 1e-9);
    }

    #[test]
    fn matches_formula_and_restores_peak() {
        let (x, y) = (wave(4, 0.2), wave(5, 3.0));
        let alpha = 0.01;
        let mid = mix_normalized(&x, &y, alpha).unwrap();
        let (px, py) = (x.peak(), y.peak());
        for c in 0..4 {
            for n in 0..x.len() {
                let expect = (1.0 - alpha) * x.channel(c)[n] / px + alpha * y.channel(c)[n] / py;
                assert!((mid.channel(c)[n] - expect).abs() < 1e-12);
            }
        }
        let out = mixup(&x, &y, alpha, &MixupParams::default()).unwrap();
        assert!((out.peak() - px).abs() < 1e-9);
        assert!(max_diff(&out, &mid.scaled(px / mid.peak())) < 1e-12);
    }

    #[test]
    fn errors() {
        let x = wave(1, 1.0);
        let short = MultiChannelWaveform::zeros(4, 10, 16000);
        assert!(matches!(mix_normalized(&x, &short, 0.0), Err(Error::Size(_))));
        assert!(mixup(&x, &x, 0.5, &MixupParams::default()).is_err());
        assert!(MixupParams { alpha_range: (0.2, 0.1) }.validate().is_err());
        assert!(MixupParams { alpha_range: (0.0, 1.0) }.validate().is_err());
        assert!(MixupParams::default().validate().is_ok());
    }
}
