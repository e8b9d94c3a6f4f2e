//! Simulates a small unlabeled corpus and runs contrastive pretraining with the
//! full augmentation plan, then resumes from the checkpoint for more epochs.
//!
//!     cargo run --release --example pretrain_small [scenes] [epochs]

use mcsimclr::rng::RngStream;
use mcsimclr::roomsim::{build_dataset, load_manifest, SourceProvider, Split};
use mcsimclr::ssl::{pretrain, PretrainConfig};

fn main() -> mcsimclr::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let scenes = args.next().flatten().unwrap_or(48);
    let epochs = args.next().flatten().unwrap_or(4);
    let dir = tempfile::tempdir().expect("temp dir");

    let path = build_dataset(scenes, Split::Pretrain, &SourceProvider::Synthetic { n_classes: 4 }, &RngStream::new(1), dir.path())?;
    let manifest = load_manifest(path)?;
    println!("simulated {} scenes", manifest.len());

    let cfg = PretrainConfig {
        epochs,
        batch_pairs: 16,
        base_lr: 0.05,
        warmup_epochs: 1,
        checkpoint_every: 1,
        stop_after: Some(epochs / 2),
        verbose: true,
        seed: 7,
        ..PretrainConfig::default()
    };
    let out = dir.path().join("run");
    let first = pretrain(&manifest, &cfg, &out, false)?;
    println!("stopped after {} epochs; resuming", first.epoch_losses.len());
    let done = pretrain(&manifest, &PretrainConfig { stop_after: None, ..cfg }, &out, true)?;
    println!("losses of the resumed epochs: {:?}", done.epoch_losses.iter().map(|l| (l * 1e3).round() / 1e3).collect::<Vec<_>>());
    println!("checkpoint {} ({} optimizer steps)", done.checkpoint.display(), done.model.step);
    Ok(())
}
