//! Synthetic class-labeled sources.
//!
//! Each class is a harmonic tone with its own fundamental, spectral tilt,
//! formant and amplitude-modulation rate, plus a weak broadband noise floor so
//! that every frequency carries phase information for GCC. Seeds vary the pitch
//! by a few percent, the harmonic phases, the modulation phase and the noise.

use std::f64::consts::TAU;

use crate::audio::{peak_normalize, MultiChannelWaveform, WORKING_RATE};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const MAX_CLASSES: usize = 20;

const MAX_HARMONIC_HZ: f64 = 7000.0;

/// Generator parameters of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTemplate {
    pub f0_hz: f64,
    pub tilt: f64,
    pub formant_hz: f64,
    pub am_rate_hz: f64,
    pub noise_level: f64,
}

impl ClassTemplate {
    pub fn for_class(class_id: usize) -> Result<Self> {
        if class_id >= MAX_CLASSES {
            return Err(Error::Data(format!(
                "class {class_id} outside 0..{MAX_CLASSES}"
            )));
        }
        let k = class_id as f64;
        Ok(Self {
            f0_hz: 110.0 * 2f64.powf(0.2 * k),
            tilt: [0.6, 1.2, 1.8, 0.9][class_id % 4],
            formant_hz: 600.0 * 2f64.powf(0.5 * ((3 * class_id) % 7) as f64),
            am_rate_hz: 1.5 + 1.25 * (class_id % 5) as f64,
            noise_level: 0.05,
        })
    }
}

/// Deterministic (given the seed) mono source of class `class_id` at the working rate,
/// peak-normalized to 1.
pub fn synth_source(class_id: usize, duration_secs: f64, rng: &mut RngStream) -> Result<MultiChannelWaveform> {
    let tpl = ClassTemplate::for_class(class_id)?;
    let fs = WORKING_RATE as f64;
    let n = (duration_secs * fs).round() as usize;
    let f0 = tpl.f0_hz * (1.0 + rng.uniform(-0.03, 0.03));
    let am_phase = rng.uniform(0.0, TAU);
    let harmonics: Vec<(f64, f64, f64)> = (1..)
        .map(|h| h as f64 * f0)
        .take_while(|&f| f < MAX_HARMONIC_HZ)
        .enumerate()
        .map(|(i, f)| {
            let h = (i + 1) as f64;
            let formant = 1.0 + 4.0 * (-((f - tpl.formant_hz) / (0.3 * tpl.formant_hz)).powi(2)).exp();
            (TAU * f / fs, h.powf(-tpl.tilt) * formant, rng.uniform(0.0, TAU))
        })
        .collect();
    let ramp = (0.01 * fs) as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let mut tone = 0.0;
        for &(w, a, ph) in &harmonics {
            tone += a * (w * i as f64 + ph).sin();
        }
        let env = 0.6 + 0.4 * (TAU * tpl.am_rate_hz * t + am_phase).sin();
        let edge = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
        out.push(edge * (env * tone + tpl.noise_level * rng.gaussian()));
    }
    let w = MultiChannelWaveform::mono(out, WORKING_RATE)?;
    Ok(peak_normalize(&w, 1.0))
}
