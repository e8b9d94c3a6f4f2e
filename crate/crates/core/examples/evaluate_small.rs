//! Linear probe and subset fine-tuning of a random and a briefly pretrained
//! encoder on a small labeled corpus, rendered as a Markdown table.
//!
//!     cargo run --release --example evaluate_small

use mcsimclr::eval::{evaluate, render_markdown, train_heads, EncoderInit, EvalConfig, EvalProtocol, ProtocolMode, SubsetAmount};
use mcsimclr::rng::RngStream;
use mcsimclr::roomsim::{build_dataset, load_manifest, SourceProvider, Split};
use mcsimclr::ssl::{pretrain, PretrainConfig};

fn main() -> mcsimclr::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let provider = SourceProvider::Synthetic { n_classes: 4 };
    let rng = RngStream::new(11);
    let load = |split, n| -> mcsimclr::Result<_> { load_manifest(build_dataset(n, split, &provider, &rng, dir.path())?) };
    let (pre, train, test) = (load(Split::Pretrain, 96)?, load(Split::Train, 80)?, load(Split::Test, 40)?);

    let cfg = PretrainConfig {
        epochs: 4,
        batch_pairs: 32,
        warmup_epochs: 1,
        checkpoint_every: 0,
        seed: 3,
        ..PretrainConfig::default()
    };
    let ck = pretrain(&pre, &cfg, dir.path().join("pre"), false)?.checkpoint;

    let eval = EvalConfig {
        epochs: 20,
        warmup_epochs: 2,
        batch: 32,
        ..EvalConfig::default()
    };
    let mut reports = Vec::new();
    for mode in [ProtocolMode::LinearProbe, ProtocolMode::SubsetFineTune(SubsetAmount::Fraction(0.5))] {
        for (name, init) in [("random", EncoderInit::Random), ("pretrained", EncoderInit::Pretrained(ck.clone()))] {
            let protocol = EvalProtocol {
                mode,
                init,
                config: eval.clone(),
                seed: 5,
            };
            let out = train_heads(&protocol, &train, 4)?;
            let label = format!("{name} ({:.3} h labeled)", out.labeled_hours);
            reports.push(evaluate(&out.model, &test, &label, &protocol, out.labeled_hours)?.0);
        }
    }
    print!("{}", render_markdown(&reports));
    Ok(())
}
