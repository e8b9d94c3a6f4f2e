use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::batch::{assemble_batch_from, load_working};
use super::loss::{nt_xent, NtXentConfig};
use crate::audio::{center_crop, SourceId};
use crate::augment::AugmentationPlan;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::nn::{
    lr_at, sgd_step, sum_in_order, Checkpoint, CheckpointMeta, Encoder, EncoderCache, EncoderConfig, LrSchedule,
    OptimizerState, Params, Projector, ProjectorCache, Scalar, SgdConfig, Standardizer,
};
use crate::rng::RngStream;
use crate::roomsim::Manifest;

pub const CHECKPOINT_FILE: &str = "pretrain.ckpt";
pub const LOSS_LOG_FILE: &str = "pretrain_loss.csv";

/// Examples per parallel gradient chunk; chunk sums are added in order.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_pairs: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub sgd: SgdConfig,
    pub loss: NtXentConfig,
    pub plan: AugmentationPlan,
    pub features: FeatureConfig,
    pub seed: u64,
    /// Save a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    /// Recordings used to fit the feature standardization.
    pub standardize_clips: usize,
    /// Stop after this many completed epochs without finishing the schedule.
    pub stop_after: Option<usize>,
    pub verbose: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        let batch_pairs = 64;
        Self {
            epochs: 100,
            batch_pairs,
            base_lr: scaled_lr(batch_pairs),
            warmup_epochs: 10,
            sgd: SgdConfig::default(),
            loss: NtXentConfig::default(),
            plan: AugmentationPlan::full(),
            features: FeatureConfig::default(),
            seed: 0,
            checkpoint_every: 10,
            standardize_clips: 256,
            stop_after: None,
            verbose: false,
        }
    }
}

/// Learning rate scaled linearly from 0.2 at 512 patches per batch.
pub fn scaled_lr(batch_pairs: usize) -> f64 {
    0.2 * (2 * batch_pairs) as f64 / 512.0
}

impl PretrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::new(self.base_lr, self.warmup_epochs, self.epochs)
    }

    pub fn validate(&self, n_recordings: usize) -> Result<()> {
        if self.batch_pairs < 2 {
            return Err(Error::Config(format!("batch_pairs {} must be at least 2", self.batch_pairs)));
        }
        if self.batch_pairs > n_recordings {
            return Err(Error::Config(format!(
                "batch of {} pairs needs at least that many recordings, manifest has {n_recordings}",
                self.batch_pairs
            )));
        }
        if !(self.base_lr >= 0.0) || self.loss.temperature <= 0.0 {
            return Err(Error::Config("learning rate must be >= 0 and temperature > 0".into()));
        }
        self.plan.validate()
    }
}

/// Encoder, projector and their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct SslModel {
    pub encoder: Encoder<f32>,
    pub projector: Projector<f32>,
    pub encoder_opt: OptimizerState<Encoder<f32>>,
    pub projector_opt: OptimizerState<Projector<f32>>,
    pub standardizer: Standardizer,
    pub epochs_completed: usize,
    pub step: u64,
}

impl SslModel {
    pub fn init(cfg: &EncoderConfig, sgd: SgdConfig, standardizer: Standardizer, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed).derive_named("init", 0);
        let encoder = Encoder::new(*cfg, &mut rng)?;
        let projector = Projector::new(cfg.embedding_dim, &mut rng);
        Ok(Self {
            encoder_opt: OptimizerState::new(&encoder, sgd),
            projector_opt: OptimizerState::new(&projector, sgd),
            encoder,
            projector,
            standardizer,
            epochs_completed: 0,
            step: 0,
        })
    }

    pub fn to_checkpoint(&self, seed: u64, features: FeatureConfig) -> Checkpoint {
        let mut ck = Checkpoint::new(CheckpointMeta {
            kind: "pretrain".into(),
            encoder: self.encoder.config,
            epochs_completed: self.epochs_completed,
            step: self.step,
            seed,
            n_classes: None,
            features,
        });
        ck.push("", &self.encoder);
        ck.push("", &self.projector);
        ck.push("momentum.", &self.encoder_opt.velocity);
        ck.push("momentum.", &self.projector_opt.velocity);
        ck.push_standardizer(&self.standardizer);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, sgd: SgdConfig) -> Result<Self> {
        let mut m = Self::init(&ck.meta.encoder, sgd, ck.standardizer()?, 0)?;
        ck.restore("", &mut m.encoder)?;
        ck.restore("", &mut m.projector)?;
        if ck.has_prefix("momentum.") {
            ck.restore("momentum.", &mut m.encoder_opt.velocity)?;
            ck.restore("momentum.", &mut m.projector_opt.velocity)?;
        }
        m.epochs_completed = ck.meta.epochs_completed;
        m.step = ck.meta.step;
        Ok(m)
    }
}

/// Loss of one batch and the gradients of the encoder and projector.
pub struct StepGrads<T> {
    pub loss: f64,
    pub positive_similarity: f64,
    pub encoder: Encoder<T>,
    pub projector: Projector<T>,
}

/// Forward and backward pass of the contrastive objective over `rows` (pairmates adjacent).
pub fn contrastive_step<T: Scalar>(
    encoder: &Encoder<T>,
    projector: &Projector<T>,
    rows: &[&[T]],
    n_frames: usize,
    loss_cfg: &NtXentConfig,
) -> Result<StepGrads<T>> {
    type Fwd<T> = (EncoderCache<T>, ProjectorCache<T>, Vec<T>);
    let fwd: Vec<Fwd<T>> = rows
        .par_iter()
        .map(|x| {
            let (h, ec) = encoder.forward_cached(x, n_frames)?;
            let (z, pc) = projector.forward_cached(&h);
            Ok((ec, pc, z))
        })
        .collect::<Result<_>>()?;
    let z: Vec<Vec<T>> = fwd.iter().map(|f| f.2.clone()).collect();
    let out = nt_xent(&z, loss_cfg)?;
    let parts: Vec<(Encoder<T>, Projector<T>)> = fwd
        .par_chunks(GRAD_CHUNK)
        .zip(out.grads.par_chunks(GRAD_CHUNK))
        .map(|(chunk, dz)| {
            let mut ge = encoder.zeros_like();
            let mut gp = projector.zeros_like();
            for ((ec, pc, _), dz) in chunk.iter().zip(dz) {
                let dh = projector.backward(pc, dz, &mut gp);
                encoder.backward(ec, &dh, &mut ge, false);
            }
            (ge, gp)
        })
        .collect();
    let (ge, gp): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok(StepGrads {
        loss: out.loss,
        positive_similarity: out.positive_similarity,
        encoder: sum_in_order(ge).expect("non-empty batch"),
        projector: sum_in_order(gp).expect("non-empty batch"),
    })
}

/// Fits standardization on clean center crops of the first `max_clips` recordings.
pub fn fit_standardizer(manifest: &Manifest, extractor: &FeatureExtractor, max_clips: usize) -> Result<Standardizer> {
    let n = manifest.len().min(max_clips.max(1));
    let stacks = (0..n)
        .into_par_iter()
        .map(|i| {
            let w = load_working(manifest, i)?;
            extractor.extract(&center_crop(&w, SourceId(i as u64)))
        })
        .collect::<Result<Vec<_>>>()?;
    Standardizer::fit(&stacks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSummary {
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
    /// Mean loss of each epoch run in this call.
    pub epoch_losses: Vec<f64>,
    pub model: SslModel,
}

fn batches_of(order: &[usize], n: usize) -> Vec<&[usize]> {
    order.chunks(n).filter(|c| c.len() >= 2).collect()
}

/// Contrastive pre-training. When `resume` is set and `out_dir` holds a
/// checkpoint, training continues from it and reproduces the uninterrupted run.
pub fn pretrain(manifest: &Manifest, cfg: &PretrainConfig, out_dir: impl AsRef<Path>, resume: bool) -> Result<PretrainSummary> {
    cfg.validate(manifest.len())?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ck_path = out_dir.join(CHECKPOINT_FILE);
    let log_path = out_dir.join(LOSS_LOG_FILE);
    let extractor = FeatureExtractor::new(cfg.features, crate::audio::WORKING_RATE)?;

    let mut model = if resume && ck_path.exists() {
        let ck = Checkpoint::load(&ck_path)?;
        if ck.meta.seed != cfg.seed {
            return Err(Error::Config(format!(
                "checkpoint was trained with seed {}, run asks for {}",
                ck.meta.seed, cfg.seed
            )));
        }
        SslModel::from_checkpoint(&ck, cfg.sgd)?
    } else {
        let standardizer = fit_standardizer(manifest, &extractor, cfg.standardize_clips)?;
        let (c, f, _) = extractor
            .output_shape(4, crate::audio::patch_len(crate::audio::WORKING_RATE))
            .ok_or_else(|| Error::Config("patch shorter than one STFT frame".into()))?;
        let enc_cfg = EncoderConfig::for_input(c.max(standardizer.n_channels()), f);
        SslModel::init(&enc_cfg, cfg.sgd, standardizer, cfg.seed)?
    };

    // keep the log rows of completed epochs only
    let mut log_text = String::from("step,epoch,lr,loss\n");
    if model.epochs_completed > 0 {
        if let Ok(old) = std::fs::read_to_string(&log_path) {
            for line in old.lines().skip(1) {
                let epoch: Option<usize> = line.split(',').nth(1).and_then(|v| v.parse().ok());
                if epoch.is_some_and(|e| e < model.epochs_completed) {
                    log_text.push_str(line);
                    log_text.push('\n');
                }
            }
        }
    }
    std::fs::write(&log_path, &log_text).map_err(|e| Error::io(&log_path, e))?;
    let mut log = std::fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;

    let root = RngStream::new(cfg.seed);
    let sched = cfg.schedule();
    let last = cfg.stop_after.map_or(cfg.epochs, |s| s.min(cfg.epochs));
    let mut epoch_losses = Vec::new();
    if model.epochs_completed == 0 {
        model.to_checkpoint(cfg.seed, cfg.features).save(&ck_path)?;
    }
    for epoch in model.epochs_completed..last {
        let lr = lr_at(epoch, &sched);
        let mut order: Vec<usize> = (0..manifest.len()).collect();
        root.derive_named("shuffle", epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        let batches = batches_of(&order, cfg.batch_pairs);
        for (b, idx) in batches.iter().enumerate() {
            let brng = root.derive_named("batch", ((epoch as u64) << 32) | b as u64);
            let batch = assemble_batch_from(manifest, idx, &cfg.plan, &extractor, &model.standardizer, &brng)?;
            let grads = contrastive_step(&model.encoder, &model.projector, &batch.rows(), batch.shape.2, &cfg.loss)
                .map_err(|e| Error::Training {
                    step: model.step,
                    detail: e.to_string(),
                })?;
            if !grads.loss.is_finite() {
                return Err(Error::Training {
                    step: model.step,
                    detail: format!("loss is {} at epoch {epoch}; last good checkpoint kept at {}", grads.loss, ck_path.display()),
                });
            }
            let fail = |e: Error| Error::Training {
                step: model.step,
                detail: format!("{e}; last good checkpoint kept at {}", ck_path.display()),
            };
            sgd_step(&mut model.encoder, &grads.encoder, &mut model.encoder_opt, lr).map_err(fail)?;
            sgd_step(&mut model.projector, &grads.projector, &mut model.projector_opt, lr).map_err(fail)?;
            model.step += 1;
            total += grads.loss;
            writeln!(log, "{},{},{},{}", model.step, epoch, lr, grads.loss).map_err(|e| Error::io(&log_path, e))?;
        }
        let mean = total / batches.len().max(1) as f64;
        epoch_losses.push(mean);
        model.epochs_completed = epoch + 1;
        if cfg.verbose {
            eprintln!("epoch {:>4}  lr {lr:.5}  loss {mean:.4}", epoch + 1);
        }
        let at_cadence = cfg.checkpoint_every > 0 && model.epochs_completed % cfg.checkpoint_every == 0;
        if at_cadence || model.epochs_completed == last {
            model.to_checkpoint(cfg.seed, cfg.features).save(&ck_path)?;
        }
    }
    Ok(PretrainSummary {
        checkpoint: ck_path,
        loss_log: log_path,
        epoch_losses,
        model,
    })
}
