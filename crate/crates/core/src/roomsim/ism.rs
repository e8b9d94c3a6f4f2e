//! Image source method for rectangular rooms with uniform wall absorption.

use super::{dist, ArrayGeometry, RoomScene, SPEED_OF_SOUND};
use crate::audio::{sinc, WORKING_RATE};

/// Length of the fractional-delay interpolation kernel.
pub const SINC_TAPS: usize = 81;

/// Default high-pass cutoff for simulated responses.
pub const HIGHPASS_HZ: f64 = 50.0;

/// Uniform wall absorption from Sabine's relation, `min(1, 0.161 V / (RT60 · S))`.
pub fn rt60_to_absorption(rt60: f64, room_dims: [f64; 3]) -> f64 {
    let [w, l, h] = room_dims;
    let volume = w * l * h;
    let surface = 2.0 * (w * l + w * h + l * h);
    (0.161 * volume / (rt60 * surface)).min(1.0)
}

/// Uniform wall absorption from Eyring's relation, `1 - exp(-0.161 V / (RT60 · S))`.
pub fn rt60_to_absorption_eyring(rt60: f64, room_dims: [f64; 3]) -> f64 {
    let [w, l, h] = room_dims;
    let volume = w * l * h;
    let surface = 2.0 * (w * l + w * h + l * h);
    1.0 - (-0.161 * volume / (rt60 * surface)).exp()
}

/// Uniform wall absorption that makes the image-source response itself decay in `rt60`.
///
/// In a shoebox room an image at distance `x` along direction `u` has undergone
/// about `x · Σ|u_k| / L_k` reflections, so late energy is dominated by directions
/// with few reflections and the response decays slower than Sabine or Eyring
/// predict. This averages the per-direction decay over the sphere, measures the
/// -5 to -25 dB slope of the resulting Schroeder curve and solves for the
/// absorption that gives the requested 60 dB time.
pub fn rt60_to_absorption_image_decay(rt60: f64, room_dims: [f64; 3]) -> f64 {
    const N_DIRS: usize = 4096;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rates: Vec<f64> = (0..N_DIRS)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / N_DIRS as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let u = [r * phi.cos(), r * phi.sin(), z];
            (0..3).map(|k| u[k].abs() / room_dims[k]).sum::<f64>()
        })
        .collect();
    // Schroeder curve in units of travelled distance for unit log-attenuation per bounce
    let edc = |x: f64| rates.iter().map(|s| (-s * x).exp() / s).sum::<f64>();
    let total = edc(0.0);
    let crossing = |db: f64| {
        let target = total * 10f64.powf(db / 10.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while edc(hi) > target {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if edc(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let unit_t60 = 3.0 * (crossing(-25.0) - crossing(-5.0));
    let log_atten = unit_t60 / (SPEED_OF_SOUND * rt60);
    1.0 - (-log_atten).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxOrder {
    /// Every image whose path is shorter than the response window (`RT60` plus the
    /// longest direct path).
    Auto,
    /// Images with at most this many wall reflections.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AbsorptionModel {
    Sabine,
    Eyring,
    ImageDecay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsmOptions {
    pub max_order: MaxOrder,
    /// Images with up to this many reflections get the full windowed-sinc kernel;
    /// later ones are deposited with two-tap linear interpolation.
    pub sinc_order: usize,
    pub absorption: AbsorptionModel,
    /// Cutoff of the high-pass applied to each response. Image amplitudes are all
    /// positive, so without it the dense tail builds up a DC component that decays
    /// far slower than the reverberant energy.
    pub highpass_hz: Option<f64>,
    pub sample_rate: u32,
}

impl Default for IsmOptions {
    fn default() -> Self {
        Self {
            max_order: MaxOrder::Auto,
            sinc_order: 10,
            absorption: AbsorptionModel::ImageDecay,
            highpass_hz: Some(HIGHPASS_HZ),
            sample_rate: WORKING_RATE,
        }
    }
}

/// Per-microphone impulse responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl Rir {
    pub fn len(&self) -> usize {
        self.taps.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Simulates the response from the scene's source to every microphone.
pub fn simulate_rir(scene: &RoomScene, geom: &ArrayGeometry, max_order: MaxOrder) -> Rir {
    simulate_rir_with(
        scene,
        geom,
        IsmOptions {
            max_order,
            ..IsmOptions::default()
        },
    )
}

struct AxisImage {
    d2: f64,
    refl: usize,
}

fn axis_images(room_len: f64, src: f64, mic: f64, bound: i64) -> Vec<AxisImage> {
    let mut out = Vec::with_capacity((4 * bound + 2) as usize);
    for l in -bound..=bound {
        for u in 0..2i64 {
            let p = (1 - 2 * u) as f64 * src + 2.0 * l as f64 * room_len;
            let d = p - mic;
            out.push(AxisImage {
                d2: d * d,
                refl: ((l - u).abs() + l.abs()) as usize,
            });
        }
    }
    out.sort_by(|a, b| a.d2.total_cmp(&b.d2));
    out
}

pub fn simulate_rir_with(scene: &RoomScene, geom: &ArrayGeometry, opts: IsmOptions) -> Rir {
    let fs = opts.sample_rate as f64;
    let a = match opts.absorption {
        AbsorptionModel::Sabine => rt60_to_absorption(scene.rt60, scene.room_dims),
        AbsorptionModel::Eyring => rt60_to_absorption_eyring(scene.rt60, scene.room_dims),
        AbsorptionModel::ImageDecay => rt60_to_absorption_image_decay(scene.rt60, scene.room_dims),
    };
    let beta = (1.0 - a).max(0.0).sqrt();
    let mics = geom.positions(scene.array_center, scene.array_yaw_deg);
    let src = scene.source_position;
    let max_direct = mics.iter().map(|&m| dist(m, src)).fold(0.0, f64::max);
    let half = (SINC_TAPS / 2) as i64;

    let (max_dist, order_cap, len) = match opts.max_order {
        MaxOrder::Auto => {
            let window = scene.rt60 + max_direct / SPEED_OF_SOUND;
            let len = (window * fs).ceil() as usize + half as usize + 1;
            (window * SPEED_OF_SOUND, usize::MAX, len)
        }
        MaxOrder::Fixed(k) => {
            // every image with k reflections lies within this distance
            let diag = scene.room_dims.iter().map(|d| d * d).sum::<f64>().sqrt();
            let reach = max_direct + 2.0 * (k as f64 + 1.0) * diag;
            let len = (reach / SPEED_OF_SOUND * fs).ceil() as usize + half as usize + 1;
            (reach, k, len)
        }
    };
    let max_d2 = max_dist * max_dist;
    let bounds: Vec<i64> = (0..3)
        .map(|ax| match opts.max_order {
            MaxOrder::Auto => (max_dist / (2.0 * scene.room_dims[ax])).ceil() as i64 + 1,
            MaxOrder::Fixed(k) => k as i64 + 1,
        })
        .collect();
    let max_refl = bounds.iter().map(|b| 2 * b + 1).sum::<i64>() as usize;
    let mut beta_pow = vec![1.0; max_refl + 1];
    for i in 1..beta_pow.len() {
        beta_pow[i] = beta_pow[i - 1] * beta;
    }

    let mut taps = vec![vec![0.0; len]; mics.len()];
    for (mic, out) in mics.iter().zip(taps.iter_mut()) {
        let axes: Vec<Vec<AxisImage>> = (0..3)
            .map(|ax| axis_images(scene.room_dims[ax], src[ax], mic[ax], bounds[ax]))
            .collect();
        for ix in &axes[0] {
            if ix.d2 > max_d2 {
                break;
            }
            if ix.refl > order_cap {
                continue;
            }
            for iy in &axes[1] {
                let dxy = ix.d2 + iy.d2;
                if dxy > max_d2 {
                    break;
                }
                if ix.refl + iy.refl > order_cap {
                    continue;
                }
                for iz in &axes[2] {
                    let d2 = dxy + iz.d2;
                    if d2 > max_d2 {
                        break;
                    }
                    let refl = ix.refl + iy.refl + iz.refl;
                    if refl > order_cap {
                        continue;
                    }
                    let r = d2.sqrt();
                    let amp = beta_pow[refl] / r;
                    let delay = r / SPEED_OF_SOUND * fs;
                    if refl <= opts.sinc_order {
                        deposit_sinc(out, delay, amp);
                    } else {
                        deposit_linear(out, delay, amp);
                    }
                }
            }
        }
    }
    if let Some(fc) = opts.highpass_hz {
        for t in taps.iter_mut() {
            highpass_in_place(t, fc, fs);
        }
    }
    Rir {
        taps,
        sample_rate: opts.sample_rate,
    }
}

/// Second-order Butterworth high-pass, direct form I.
fn highpass_in_place(x: &mut [f64], cutoff_hz: f64, fs: f64) {
    let w0 = std::f64::consts::TAU * cutoff_hz / fs;
    let alpha = w0.sin() / std::f64::consts::SQRT_2;
    let cw = w0.cos();
    let a0 = 1.0 + alpha;
    let b = [(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0];
    let a = [-2.0 * cw / a0, (1.0 - alpha) / a0];
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let y = b[0] * *v + b[1] * x1 + b[2] * x2 - a[0] * y1 - a[1] * y2;
        x2 = x1;
        x1 = *v;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn deposit_sinc(out: &mut [f64], delay: f64, amp: f64) {
    let half = (SINC_TAPS / 2) as i64;
    let n0 = delay.floor() as i64;
    let width = SINC_TAPS as f64;
    for k in (n0 - half)..=(n0 + half) {
        if k < 0 || k as usize >= out.len() {
            continue;
        }
        let x = k as f64 - delay;
        let w = 0.5 * (1.0 + (std::f64::consts::TAU * x / width).cos());
        out[k as usize] += amp * sinc(x) * w;
    }
}

fn deposit_linear(out: &mut [f64], delay: f64, amp: f64) {
    let n0 = delay.floor();
    let frac = delay - n0;
    let k = n0 as usize;
    if k + 1 < out.len() {
        out[k] += amp * (1.0 - frac);
        out[k + 1] += amp * frac;
    }
}

/// Schroeder backward-integrated energy decay curve in dB (0 dB at the first sample).
pub fn schroeder_curve_db(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps
        .iter()
        .rev()
        .map(|x| {
            acc += x * x;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| if total > 0.0 && e > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Reverberation time extrapolated from a least-squares fit of the decay curve
/// between -5 dB and -25 dB. `None` when the curve never reaches -25 dB.
pub fn decay_time(taps: &[f64], sample_rate: u32) -> Option<f64> {
    let edc = schroeder_curve_db(taps);
    let start = edc.iter().position(|&v| v <= -5.0)?;
    let end = edc.iter().position(|&v| v <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let pts: Vec<(f64, f64)> = (start..=end)
        .map(|n| (n as f64 / sample_rate as f64, edc[n]))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -60.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sabine_hand_value() {
        // 10 x 5 x 2 room: V = 100, S = 2 (50 + 20 + 10) = 160
        let a = rt60_to_absorption(0.5, [10.0, 5.0, 2.0]);
        assert!((a - 0.161 * 100.0 / (0.5 * 160.0)).abs() < 1e-12);
        assert_eq!(rt60_to_absorption(1e-6, [10.0, 5.0, 2.0]), 1.0);
        assert!(rt60_to_absorption(1e9, [10.0, 5.0, 2.0]) < 1e-9);
    }

    #[test]
    fn eyring_below_sabine() {
        let dims = [6.0, 5.0, 3.0];
        for rt in [0.2, 0.5, 1.0] {
            let s = rt60_to_absorption(rt, dims);
            let e = rt60_to_absorption_eyring(rt, dims);
            assert!(e < s && e > 0.0);
            // -ln(1 - a_e) equals a_sabine by construction
            assert!((-(1.0 - e).ln() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_path_delay_and_amplitude() {
        let geom = ArrayGeometry {
            mic_offsets: vec![[0.0, 0.0, 0.0]],
        };
        let scene = RoomScene::new([20.0, 20.0, 10.0], 0.3, [10.0, 10.0, 5.0], 0.0, [11.0, 10.0, 5.0]);
        let opts = IsmOptions {
            max_order: MaxOrder::Fixed(0),
            highpass_hz: None,
            ..IsmOptions::default()
        };
        let rir = simulate_rir_with(&scene, &geom, opts);
        let taps = &rir.taps[0];
        let expected: f64 = 16000.0 / 343.0;
        let (peak_idx, peak) = taps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(peak_idx, expected.round() as usize);
        // the band-limited impulse sums to the path amplitude 1/r = 1
        let sum: f64 = taps.iter().sum();
        assert!((sum - 1.0).abs() < 0.02, "sum {sum}");
        assert!(*peak > 0.5);
        // energy centroid at the fractional delay
        let centroid: f64 = taps.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / sum;
        assert!((centroid - expected).abs() < 0.05, "centroid {centroid}");
    }

    #[test]
    fn equidistant_mics_identical() {
        let geom = ArrayGeometry::default();
        // source on the array's vertical axis: all mics equidistant
        let scene = RoomScene::new([20.0, 20.0, 10.0], 0.3, [10.0, 10.0, 5.0], 0.0, [10.0, 10.0, 6.5]);
        let rir = simulate_rir(&scene, &geom, MaxOrder::Fixed(0));
        for m in 1..4 {
            for (a, b) in rir.taps[0].iter().zip(&rir.taps[m]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decay_curve_monotone() {
        let scene = RoomScene::new([6.0, 5.0, 3.0], 0.4, [2.0, 2.0, 1.2], 15.0, [4.0, 3.5, 1.6]);
        let rir = simulate_rir(&scene, &ArrayGeometry::default(), MaxOrder::Auto);
        assert!(rir.len() as f64 >= 0.4 * 16000.0);
        for t in &rir.taps {
            let edc = schroeder_curve_db(t);
            assert!(edc.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn highpass_removes_dc_tail() {
        let scene = RoomScene::new([5.0, 4.0, 3.0], 0.6, [1.5, 1.5, 1.2], 0.0, [3.5, 2.5, 1.7]);
        let geom = ArrayGeometry::circular(1, 0.0);
        let raw = simulate_rir_with(&scene, &geom, IsmOptions { highpass_hz: None, ..IsmOptions::default() });
        let hp = simulate_rir(&scene, &geom, MaxOrder::Auto);
        let raw_sum: f64 = raw.taps[0].iter().sum();
        let hp_sum: f64 = hp.taps[0].iter().sum();
        assert!(raw_sum > 1.0);
        assert!(hp_sum.abs() < 0.05 * raw_sum, "{hp_sum} vs {raw_sum}");
    }

    #[test]
    fn image_decay_absorption_hits_target() {
        let geom = ArrayGeometry::circular(1, 0.0);
        for (dims, rt60) in [([5.0, 5.0, 5.0], 0.5), ([8.0, 4.0, 3.0], 0.4), ([9.0, 7.0, 2.6], 0.7)] {
            let scene = RoomScene::new(dims, rt60, [1.3, 1.7, 1.1], 0.0, [3.1, 2.2, 2.0]);
            let rir = simulate_rir(&scene, &geom, MaxOrder::Auto);
            let t = decay_time(&rir.taps[0], 16000).unwrap();
            assert!((t / rt60 - 1.0).abs() < 0.2, "{dims:?}: {t} vs {rt60}");
        }
        // a cube has the least spread of per-direction decay rates, so Eyring is close
        let a = rt60_to_absorption_image_decay(0.5, [5.0; 3]);
        let e = rt60_to_absorption_eyring(0.5, [5.0; 3]);
        assert!(a > e && a < 1.1 * e);
    }

    #[test]
    fn exponential_decay_time_recovered() {
        // synthetic exponentially decaying noise with a 0.5 s reverberation time
        let mut rng = crate::rng::RngStream::new(3);
        let fs = 16000;
        let tau = 0.5 / (3.0 * std::f64::consts::LN_10); // amplitude e-folding time
        let taps: Vec<f64> = (0..16000)
            .map(|n| rng.gaussian() * (-(n as f64) / fs as f64 / tau).exp())
            .collect();
        let t = decay_time(&taps, fs).unwrap();
        assert!((t - 0.5).abs() < 0.03, "t = {t}");
    }
}
