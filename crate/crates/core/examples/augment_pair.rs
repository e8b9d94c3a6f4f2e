//! Runs the full augmentation plan on a positive pair and prints every random
//! choice it made, then shows how a ChannelSwap relabels the source direction.
//!
//!     cargo run --release --example augment_pair [seed]

use mcsimclr::audio::{crop_pair, SourceId, WORKING_RATE};
use mcsimclr::augment::{apply_plan_traced, AugmentationPlan, RecordingPool};
use mcsimclr::features::{FeatureConfig, FeatureExtractor};
use mcsimclr::rng::RngStream;
use mcsimclr::roomsim::{render_scene, sample_scene, synth_source, ArrayGeometry};

fn main() -> mcsimclr::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut rng = RngStream::new(seed);
    let geom = ArrayGeometry::default();
    // an anchor recording and a second one to mix in as background
    let mut record = |class| -> mcsimclr::Result<_> {
        let scene = sample_scene(&mut rng)?;
        let src = synth_source(class, 3.0, &mut rng)?;
        Ok((scene.azimuth_deg, render_scene(&scene, &geom, &src)?))
    };
    let (az, anchor) = record(0)?;
    let (_, other) = record(5)?;
    let pool = RecordingPool::new(vec![(SourceId(0), &anchor), (SourceId(1), &other)]);

    let ex = FeatureExtractor::new(FeatureConfig::default(), WORKING_RATE)?;
    let mut rng = RngStream::new(seed).derive_named("augment", 0);
    let (a, b) = crop_pair(&anchor, SourceId(0), &mut rng);
    let plan = AugmentationPlan::full();
    let (sa, sb, trace) = apply_plan_traced((&a, &b), &pool, &plan, &ex, &mut rng)?;

    println!("plan {} on a pair from a recording at {az:.1}°", plan.label());
    if let Some(arr) = trace.arrangement {
        println!(
            "  ChannelSwap {:?} (θ ↦ {}θ {:+}°): this view's direction is {:.1}°",
            arr.permutation(),
            if arr.azimuth_sign() > 0 { "" } else { "−" },
            arr.azimuth_offset_deg(),
            arr.transform_azimuth(az)
        );
    }
    for (k, (p, stack)) in trace.patches.iter().zip([&sa, &sb]).enumerate() {
        let dropped: Vec<usize> = p.dropped.iter().enumerate().filter(|d| *d.1).map(|d| d.0).collect();
        println!(
            "  view {k}: mixup α {:?}, crop {:?}, dropped channels {dropped:?}, stack {:?}",
            p.mixup_alpha.map(|x| (x * 1e4).round() / 1e4),
            p.crop.map(|c| (c.freq_start, c.time_start, c.height, c.width)),
            stack.shape()
        );
    }
    Ok(())
}
