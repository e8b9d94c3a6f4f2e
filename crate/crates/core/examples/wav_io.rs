//! Multichannel WAV round trip, resampling and positive-pair cropping.
//!
//!     cargo run --release --example wav_io

use mcsimclr::audio::{crop_pair, load_wav, resample, save_wav, MultiChannelWaveform, SourceId, WORKING_RATE};
use mcsimclr::rng::RngStream;

fn main() -> mcsimclr::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let rate = 44_100;
    // four channels of a 440 Hz tone with a growing phase lag
    let channels: Vec<Vec<f64>> = (0..4)
        .map(|m| {
            (0..2 * rate)
                .map(|n| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / rate as f64 - 0.3 * m as f64).sin())
                .collect()
        })
        .collect();
    let w = MultiChannelWaveform::new(channels, rate as u32)?;
    let path = dir.path().join("tone.wav");
    save_wav(&w, &path)?;
    let back = load_wav(&path)?;
    let err = w.channels().iter().flatten().zip(back.channels().iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} ch × {} samples at {} Hz, round-trip max error {err:.2e}", back.n_channels(), back.len(), back.sample_rate());

    let working = resample(&back, WORKING_RATE);
    println!("resampled to {} Hz: {} samples ({:.2} s)", working.sample_rate(), working.len(), working.duration_secs());

    let (a, b) = crop_pair(&working, SourceId(0), &mut RngStream::new(3));
    println!("positive pair: two {}-sample patches from source {:?}", a.waveform.len(), b.source_id);
    Ok(())
}
