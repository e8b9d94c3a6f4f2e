//! Extracts the log-Mel + GCC-PHAT stack of a simulated anechoic recording and
//! reads the inter-microphone delays back off the GCC channels.
//!
//!     cargo run --release --example feature_stack [azimuth_deg]

use mcsimclr::audio::{center_crop, MultiChannelWaveform, SourceId, WORKING_RATE};
use mcsimclr::features::{ChannelRole, FeatureConfig, FeatureExtractor};
use mcsimclr::rng::RngStream;
use mcsimclr::roomsim::{render_scene_with, ArrayGeometry, IsmOptions, MaxOrder, RoomScene, SPEED_OF_SOUND};

fn main() -> mcsimclr::Result<()> {
    let az: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let mut rng = RngStream::new(9);
    let noise = MultiChannelWaveform::mono((0..2 * WORKING_RATE as usize).map(|_| rng.gaussian()).collect(), WORKING_RATE)?;
    let geom = ArrayGeometry::default();
    let opts = IsmOptions {
        max_order: MaxOrder::Fixed(0),
        ..IsmOptions::default()
    };
    let rec = render_scene_with(&RoomScene::free_field(az, 2.0, 0.0), &geom, &noise, opts)?;

    let ex = FeatureExtractor::new(FeatureConfig::default(), WORKING_RATE)?;
    let stack = ex.extract(&center_crop(&rec, SourceId(0)))?;
    let (c, f, t) = stack.shape();
    println!("stack {c} × {f} × {t} for a source at {az}°");

    let (s, co) = az.to_radians().sin_cos();
    for (k, role) in stack.roles().iter().enumerate() {
        match *role {
            ChannelRole::Mel(m) => {
                let mean = stack.channel(k).iter().map(|&v| v as f64).sum::<f64>() / (f * t) as f64;
                println!("  ch {k}: log-Mel mic {m}, mean {mean:.2}");
            }
            ChannelRole::Gcc(i, j) => {
                // lag rows run from -F/2 to F/2 - 1; average over frames and take the peak
                let ch = stack.channel(k);
                let peak = (0..f)
                    .max_by(|&a, &b| {
                        let sa: f32 = ch[a * t..(a + 1) * t].iter().sum();
                        let sb: f32 = ch[b * t..(b + 1) * t].iter().sum();
                        sa.total_cmp(&sb)
                    })
                    .unwrap() as i64
                    - f as i64 / 2;
                let (oi, oj) = (geom.mic_offsets[i], geom.mic_offsets[j]);
                // far-field: mic i hears the source earlier by the projection of (i - j) on the direction
                let expected = ((oi[0] - oj[0]) * co + (oi[1] - oj[1]) * s) / SPEED_OF_SOUND * WORKING_RATE as f64;
                println!("  ch {k}: GCC-PHAT ({i},{j}), peak lag {peak:+} samples, far-field {:+.2}", -expected);
            }
        }
    }
    Ok(())
}
