//! Builds the convolutional encoder and projection head, embeds a batch and
//! checks the contrastive gradient against central finite differences in f64.
//!
//!     cargo run --release --example encoder

use mcsimclr::nn::{Encoder, EncoderConfig, Params, Projector};
use mcsimclr::rng::RngStream;
use mcsimclr::ssl::{contrastive_step, NtXentConfig};

fn main() -> mcsimclr::Result<()> {
    let mut rng = RngStream::new(1);
    let cfg = EncoderConfig::for_input(10, 64);
    let enc = Encoder::<f32>::new(cfg, &mut rng)?;
    let proj = Projector::<f32>::new(cfg.embedding_dim, &mut rng);
    println!("encoder widths {:?} -> {}-d embedding, {} parameters; projector {} parameters", cfg.widths, cfg.embedding_dim, enc.n_params(), proj.n_params());

    let t = 97;
    let batch: Vec<Vec<f32>> = (0..4).map(|_| (0..10 * 64 * t).map(|_| rng.gaussian() as f32).collect()).collect();
    let refs: Vec<&[f32]> = batch.iter().map(Vec::as_slice).collect();
    let step = contrastive_step(&enc, &proj, &refs, t, &NtXentConfig::default())?;
    println!("2 positive pairs of 10 × 64 × {t} noise: NT-Xent {:.4}, pairmate cosine {:.3}", step.loss, step.positive_similarity);

    // f64 twin of a narrow encoder for a finite-difference check
    let small = EncoderConfig {
        in_channels: 2,
        n_freq: 8,
        widths: [3, 4, 5],
        embedding_dim: 6,
    };
    let enc64 = Encoder::<f64>::new(small, &mut rng)?;
    let proj64 = Projector::<f64>::new(6, &mut rng);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..2 * 8 * 9).map(|_| rng.gaussian()).collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let loss_cfg = NtXentConfig::default();
    let g = contrastive_step(&enc64, &proj64, &refs, 9, &loss_cfg)?;
    let (flat, grad) = (enc64.flat(), g.encoder.flat());
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let i = rng.below(flat.len());
        let mut e = enc64.clone();
        let mut f = flat.clone();
        f[i] += h;
        e.set_flat(&f)?;
        let up = contrastive_step(&e, &proj64, &refs, 9, &loss_cfg)?.loss;
        f[i] -= 2.0 * h;
        e.set_flat(&f)?;
        let down = contrastive_step(&e, &proj64, &refs, 9, &loss_cfg)?.loss;
        let num = (up - down) / (2.0 * h);
        worst = worst.max((num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-7));
    }
    println!("finite-difference check on 20 encoder weights: max relative error {worst:.2e}");
    Ok(())
}
