use std::path::PathBuf;

use rayon::prelude::*;

use super::metrics::{summarize, EvalReport, ItemPrediction};
use super::subset::{subset_select, total_hours, validation_split, SubsetAmount};
use crate::audio::{center_crop, Patch, SourceId};
use crate::augment::{channel_swap, sample_arrangement, ChannelSwapArrangement, N_ARRANGEMENTS};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::nn::{
    lr_at, sgd_step, sum_in_order, Checkpoint, CheckpointMeta, Encoder, EncoderConfig, Heads, LrSchedule,
    OptimizerState, Params, SgdConfig, Standardizer,
};
use crate::rng::RngStream;
use crate::roomsim::Manifest;
use crate::ssl::load_working;

const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ProtocolMode {
    LinearProbe,
    FineTune,
    SubsetFineTune(SubsetAmount),
}

impl ProtocolMode {
    pub fn label(&self) -> &'static str {
        match self {
            ProtocolMode::LinearProbe => "linear-probe",
            ProtocolMode::FineTune => "fine-tune",
            ProtocolMode::SubsetFineTune(_) => "subset-fine-tune",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum EncoderInit {
    Pretrained(PathBuf),
    Random,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub val_fraction: f64,
    pub channel_swap: bool,
    pub sgd: SgdConfig,
    /// Encoder gradient multiplier; `None` picks 0.1 for a pretrained and 1.0 for a random encoder.
    pub encoder_grad_scale: Option<f64>,
    /// Bound on the global norm of the update direction: head gradients together
    /// with the encoder gradient times its scale.
    pub max_grad_norm: Option<f64>,
    /// Used only for a random encoder, whose standardization is fitted on the labeled set.
    /// Taken from the top-level `[features]` table when loaded from a config file.
    #[serde(skip)]
    pub features: FeatureConfig,
    pub standardize_clips: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            warmup_epochs: 10,
            lr: 0.01,
            batch: 128,
            val_fraction: 0.1,
            channel_swap: true,
            sgd: SgdConfig::default(),
            encoder_grad_scale: None,
            max_grad_norm: Some(5.0),
            features: FeatureConfig::default(),
            standardize_clips: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocol {
    pub mode: ProtocolMode,
    pub init: EncoderInit,
    pub config: EvalConfig,
    pub seed: u64,
}

impl EvalProtocol {
    pub fn grad_scale(&self) -> f64 {
        match self.mode {
            ProtocolMode::LinearProbe => 0.0,
            _ => self.config.encoder_grad_scale.unwrap_or(match self.init {
                EncoderInit::Pretrained(_) => 0.1,
                EncoderInit::Random => 1.0,
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.batch == 0 || !(c.lr >= 0.0) || !(0.0..1.0).contains(&c.val_fraction) {
            return Err(Error::Config("eval needs batch > 0, lr >= 0 and val_fraction in [0, 1)".into()));
        }
        if !(self.grad_scale() >= 0.0) {
            return Err(Error::Config("encoder_grad_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything needed to score clips.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalModel {
    pub encoder: Encoder<f32>,
    pub heads: Heads<f32>,
    pub standardizer: Standardizer,
    pub features: FeatureConfig,
}

impl EvalModel {
    pub fn to_checkpoint(&self, kind: &str, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new(CheckpointMeta {
            kind: kind.into(),
            encoder: self.encoder.config,
            epochs_completed: 0,
            step: 0,
            seed,
            n_classes: Some(self.heads.n_classes()),
            features: self.features,
        });
        ck.push("", &self.encoder);
        ck.push("", &self.heads);
        ck.push_standardizer(&self.standardizer);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let n_classes = ck
            .meta
            .n_classes
            .ok_or_else(|| Error::Data("checkpoint has no classifier head".into()))?;
        let mut rng = RngStream::new(0);
        let mut encoder = Encoder::new(ck.meta.encoder, &mut rng)?;
        let mut heads = Heads::new(ck.meta.encoder.embedding_dim, n_classes, &mut rng);
        ck.restore("", &mut encoder)?;
        ck.restore("", &mut heads)?;
        Ok(Self {
            encoder,
            heads,
            standardizer: ck.standardizer()?,
            features: ck.meta.features,
        })
    }

    /// Logits and `(cos, sin)` prediction for one clip's stack.
    pub fn predict_stack(&self, x: &[f32], n_frames: usize) -> Result<(Vec<f32>, [f32; 2])> {
        let e = self.encoder.forward(x, n_frames)?;
        let y = self.heads.localizer.forward(&e);
        Ok((self.heads.classifier.forward(&e), [y[0], y[1]]))
    }

    fn extractor(&self) -> Result<FeatureExtractor> {
        FeatureExtractor::new(self.features, crate::audio::WORKING_RATE)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub val_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Selected by validation.
    pub model: EvalModel,
    /// Heads after the final epoch.
    pub last_heads: Heads<f32>,
    pub history: Vec<EpochRecord>,
    /// Epochs whose classifier and localizer were kept.
    pub best_epochs: (usize, usize),
    pub labeled_hours: f64,
}

/// Center crops of a manifest, with labels.
struct Clips {
    crops: Vec<Patch>,
    classes: Vec<usize>,
    azimuths: Vec<f64>,
}

impl Clips {
    fn load(manifest: &Manifest) -> Result<Self> {
        let crops = (0..manifest.len())
            .into_par_iter()
            .map(|i| Ok(center_crop(&load_working(manifest, i)?, SourceId(i as u64))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            crops,
            classes: manifest.rows.iter().map(|r| r.class).collect(),
            azimuths: manifest.rows.iter().map(|r| r.azimuth_deg).collect(),
        })
    }

    fn check_classes(&self, n_classes: usize) -> Result<()> {
        match self.classes.iter().position(|&c| c >= n_classes) {
            Some(i) => Err(Error::Data(format!(
                "item {i} has class {} but the classifier has {n_classes} classes",
                self.classes[i]
            ))),
            None => Ok(()),
        }
    }
}

fn stack_of(
    patch: &Patch,
    arr: &ChannelSwapArrangement,
    extractor: &FeatureExtractor,
    st: &Standardizer,
) -> Result<(Vec<f32>, usize)> {
    let stack = if *arr == ChannelSwapArrangement::IDENTITY {
        extractor.extract(patch)?
    } else {
        let swapped = Patch {
            waveform: channel_swap(&patch.waveform, arr)?,
            source_id: patch.source_id,
        };
        extractor.extract(&swapped)?
    };
    Ok((st.apply(&stack)?, stack.shape().2))
}

fn unit(deg: f64) -> [f32; 2] {
    let r = deg.to_radians();
    [r.cos() as f32, r.sin() as f32]
}

/// Loss and parameter gradients of both heads over a batch, plus the embedding gradients.
/// Loss is mean cross-entropy plus mean squared error of the unit-vector azimuth.
fn head_step(heads: &Heads<f32>, embs: &[&[f32]], classes: &[usize], azimuths: &[f64]) -> (f64, Heads<f32>, Vec<Vec<f32>>) {
    let b = embs.len() as f64;
    let mut grad = heads.zeros_like();
    let mut loss = 0.0;
    let mut d_embs = Vec::with_capacity(embs.len());
    for ((e, &c), &az) in embs.iter().zip(classes).zip(azimuths) {
        let logits = heads.classifier.forward(e);
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let exps: Vec<f64> = logits.iter().map(|&l| (l as f64 - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss += z.ln() + max - logits[c] as f64;
        let dlogits: Vec<f32> = exps
            .iter()
            .enumerate()
            .map(|(k, &x)| ((x / z - if k == c { 1.0 } else { 0.0 }) / b) as f32)
            .collect();
        let y = heads.localizer.forward(e);
        let t = unit(az);
        let dy: Vec<f32> = (0..2)
            .map(|k| {
                let r = (y[k] - t[k]) as f64;
                loss += r * r;
                (2.0 * r / b) as f32
            })
            .collect();
        let mut de = heads.classifier.backward(e, &dlogits, &mut grad.classifier, true).expect("dx");
        let dl = heads.localizer.backward(e, &dy, &mut grad.localizer, true).expect("dx");
        de.iter_mut().zip(dl).for_each(|(a, b)| *a += b);
        d_embs.push(de);
    }
    (loss / b, grad, d_embs)
}

fn sq_norm(p: &impl Params<f32>) -> f64 {
    p.params().iter().flat_map(|v| v.data.iter()).map(|&x| (x as f64) * (x as f64)).sum()
}

/// Multiplier that brings a gradient of squared norm `sq` within `max`.
fn clip_factor(sq: f64, max: Option<f64>) -> f32 {
    match max {
        Some(m) if sq.sqrt() > m => (m / sq.sqrt()) as f32,
        _ => 1.0,
    }
}

fn predict(heads: &Heads<f32>, emb: &[f32], index: usize, class: usize, azimuth: f64) -> ItemPrediction {
    let logits = heads.classifier.forward(emb);
    let y = heads.localizer.forward(emb);
    ItemPrediction::new(index, class, &logits, (y[0] as f64, y[1] as f64), azimuth)
}

fn embed_all(encoder: &Encoder<f32>, clips: &Clips, idx: &[usize], arr: &ChannelSwapArrangement, ex: &FeatureExtractor, st: &Standardizer) -> Result<Vec<Vec<f32>>> {
    idx.par_iter()
        .map(|&i| {
            let (x, t) = stack_of(&clips.crops[i], arr, ex, st)?;
            encoder.forward(&x, t)
        })
        .collect()
}

/// Arrangement used for item `i` during `epoch`; shared by every protocol.
fn arrangement_for(root: &RngStream, epoch: usize, i: usize, enabled: bool) -> ChannelSwapArrangement {
    if enabled {
        sample_arrangement(&mut root.derive_named("swap", ((epoch as u64) << 32) | i as u64))
    } else {
        ChannelSwapArrangement::IDENTITY
    }
}

/// Trains the classification and azimuth heads (and, when fine-tuning, the encoder).
pub fn train_heads(protocol: &EvalProtocol, train: &Manifest, n_classes: usize) -> Result<TrainOutcome> {
    protocol.validate()?;
    if train.is_empty() {
        return Err(Error::Data("labeled training manifest is empty".into()));
    }
    if n_classes == 0 {
        return Err(Error::Data("no classes".into()));
    }
    let root = RngStream::new(protocol.seed);
    let train = match protocol.mode {
        ProtocolMode::SubsetFineTune(amount) => subset_select(train, amount, &root.derive_named("subset", 0))?,
        _ => train.clone(),
    };
    let labeled_hours = total_hours(&train)?;
    let clips = Clips::load(&train)?;
    clips.check_classes(n_classes)?;

    let (encoder, standardizer, features) = match &protocol.init {
        EncoderInit::Pretrained(path) => {
            let ck = Checkpoint::load(path)?;
            let mut enc = Encoder::new(ck.meta.encoder, &mut RngStream::new(0))?;
            ck.restore("", &mut enc)?;
            (enc, ck.standardizer()?, ck.meta.features)
        }
        EncoderInit::Random => {
            let features = protocol.config.features;
            let ex = FeatureExtractor::new(features, crate::audio::WORKING_RATE)?;
            let n = clips.crops.len().min(protocol.config.standardize_clips.max(1));
            let stacks = clips.crops[..n].par_iter().map(|p| ex.extract(p)).collect::<Result<Vec<_>>>()?;
            let st = Standardizer::fit(&stacks)?;
            let (c, f, _) = stacks[0].shape();
            let enc = Encoder::new(EncoderConfig::for_input(c, f), &mut root.derive_named("encoder_init", 0))?;
            (enc, st, features)
        }
    };
    let heads = Heads::new(encoder.config.embedding_dim, n_classes, &mut root.derive_named("heads_init", 0));
    let (train_idx, val_idx) = validation_split(clips.crops.len(), protocol.config.val_fraction, &root);
    let model = EvalModel {
        encoder,
        heads,
        standardizer,
        features,
    };
    match protocol.mode {
        ProtocolMode::LinearProbe => linear_probe(protocol, &root, &clips, &train_idx, &val_idx, model, labeled_hours),
        _ => fine_tune(protocol, &root, &clips, &train_idx, &val_idx, model, labeled_hours),
    }
}

fn val_metrics(preds: &[ItemPrediction]) -> (Option<f64>, Option<f64>) {
    match summarize(preds) {
        Ok((a, e)) => (Some(a), Some(e)),
        Err(_) => (None, None),
    }
}

fn linear_probe(
    protocol: &EvalProtocol,
    root: &RngStream,
    clips: &Clips,
    train_idx: &[usize],
    val_idx: &[usize],
    mut model: EvalModel,
    labeled_hours: f64,
) -> Result<TrainOutcome> {
    let cfg = &protocol.config;
    let ex = model.extractor()?;
    // embeddings of every training clip under every arrangement, computed once
    let arrangements: Vec<ChannelSwapArrangement> = if cfg.channel_swap {
        ChannelSwapArrangement::all().to_vec()
    } else {
        vec![ChannelSwapArrangement::IDENTITY]
    };
    let mut table: Vec<Vec<Vec<f32>>> = vec![Vec::new(); N_ARRANGEMENTS];
    for arr in &arrangements {
        table[arr.index()] = embed_all(&model.encoder, clips, train_idx, arr, &ex, &model.standardizer)?;
    }
    let pos: std::collections::HashMap<usize, usize> = train_idx.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let val_embs = embed_all(&model.encoder, clips, val_idx, &ChannelSwapArrangement::IDENTITY, &ex, &model.standardizer)?;

    let sched = LrSchedule::new(cfg.lr, cfg.warmup_epochs, cfg.epochs);
    let mut opt = OptimizerState::new(&model.heads, cfg.sgd);
    let mut history = Vec::with_capacity(cfg.epochs);
    let (mut best_cls, mut best_loc) = (model.heads.classifier.clone(), model.heads.localizer.clone());
    let (mut best_acc, mut best_err) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_epochs = (0, 0);
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, &sched);
        let mut order = train_idx.to_vec();
        root.derive_named("order", epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch).collect();
        for idx in &batches {
            let arrs: Vec<ChannelSwapArrangement> = idx.iter().map(|&i| arrangement_for(root, epoch, i, cfg.channel_swap)).collect();
            let embs: Vec<&[f32]> = idx.iter().zip(&arrs).map(|(i, a)| table[a.index()][pos[i]].as_slice()).collect();
            let classes: Vec<usize> = idx.iter().map(|&i| clips.classes[i]).collect();
            let az: Vec<f64> = idx.iter().zip(&arrs).map(|(&i, a)| a.transform_azimuth(clips.azimuths[i])).collect();
            let (loss, grads, _) = head_step(&model.heads, &embs, &classes, &az);
            let mut grads = grads;
            let f = clip_factor(sq_norm(&grads), cfg.max_grad_norm);
            grads.scale(f);
            sgd_step(&mut model.heads, &grads, &mut opt, lr)?;
            total += loss;
        }
        let preds: Vec<ItemPrediction> = val_idx
            .iter()
            .zip(&val_embs)
            .map(|(&i, e)| predict(&model.heads, e, i, clips.classes[i], clips.azimuths[i]))
            .collect();
        let (va, ve) = val_metrics(&preds);
        if va.map_or(true, |a| a > best_acc) {
            best_acc = va.unwrap_or(best_acc);
            best_cls = model.heads.classifier.clone();
            best_epochs.0 = epoch;
        }
        if ve.map_or(true, |e| e < best_err) {
            best_err = ve.unwrap_or(best_err);
            best_loc = model.heads.localizer.clone();
            best_epochs.1 = epoch;
        }
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: total / batches.len() as f64,
            val_accuracy: va,
            val_error: ve,
        });
    }
    let last_heads = model.heads.clone();
    model.heads = Heads {
        classifier: best_cls,
        localizer: best_loc,
    };
    Ok(TrainOutcome {
        model,
        last_heads,
        history,
        best_epochs,
        labeled_hours,
    })
}

fn fine_tune(
    protocol: &EvalProtocol,
    root: &RngStream,
    clips: &Clips,
    train_idx: &[usize],
    val_idx: &[usize],
    mut model: EvalModel,
    labeled_hours: f64,
) -> Result<TrainOutcome> {
    let cfg = &protocol.config;
    let scale = protocol.grad_scale();
    let ex = model.extractor()?;
    let sched = LrSchedule::new(cfg.lr, cfg.warmup_epochs, cfg.epochs);
    let mut head_opt = OptimizerState::new(&model.heads, cfg.sgd);
    let mut enc_opt = OptimizerState::new(&model.encoder, cfg.sgd);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (model.encoder.clone(), model.heads.clone());
    let mut best_score = f64::INFINITY;
    let mut best_epoch = 0;
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, &sched);
        let mut order = train_idx.to_vec();
        root.derive_named("order", epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch).collect();
        for idx in &batches {
            let arrs: Vec<ChannelSwapArrangement> = idx.iter().map(|&i| arrangement_for(root, epoch, i, cfg.channel_swap)).collect();
            let fwd = idx
                .par_iter()
                .zip(&arrs)
                .map(|(&i, a)| {
                    let (x, t) = stack_of(&clips.crops[i], a, &ex, &model.standardizer)?;
                    model.encoder.forward_cached(&x, t)
                })
                .collect::<Result<Vec<_>>>()?;
            let embs: Vec<&[f32]> = fwd.iter().map(|f| f.0.as_slice()).collect();
            let classes: Vec<usize> = idx.iter().map(|&i| clips.classes[i]).collect();
            let az: Vec<f64> = idx.iter().zip(&arrs).map(|(&i, a)| a.transform_azimuth(clips.azimuths[i])).collect();
            let (loss, head_grads, d_embs) = head_step(&model.heads, &embs, &classes, &az);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("fine-tuning loss is {loss} at epoch {epoch}")));
            }
            let mut head_grads = head_grads;
            let mut head_sq = sq_norm(&head_grads);
            let mut enc_grads = None;
            if scale > 0.0 {
                let parts: Vec<Encoder<f32>> = fwd
                    .par_chunks(GRAD_CHUNK)
                    .zip(d_embs.par_chunks(GRAD_CHUNK))
                    .map(|(chunk, de)| {
                        let mut g = model.encoder.zeros_like();
                        for ((_, cache), d) in chunk.iter().zip(de) {
                            model.encoder.backward(cache, d, &mut g, false);
                        }
                        g
                    })
                    .collect();
                let g = sum_in_order(parts).expect("non-empty batch");
                head_sq += scale * scale * sq_norm(&g);
                enc_grads = Some(g);
            }
            let f = clip_factor(head_sq, cfg.max_grad_norm);
            head_grads.scale(f);
            if let Some(mut g) = enc_grads {
                g.scale(f);
                // scaling the encoder step scales its gradient and weight decay alike
                sgd_step(&mut model.encoder, &g, &mut enc_opt, lr * scale)?;
            }
            sgd_step(&mut model.heads, &head_grads, &mut head_opt, lr)?;
            total += loss;
        }
        let val_embs = embed_all(&model.encoder, clips, val_idx, &ChannelSwapArrangement::IDENTITY, &ex, &model.standardizer)?;
        let preds: Vec<ItemPrediction> = val_idx
            .iter()
            .zip(&val_embs)
            .map(|(&i, e)| predict(&model.heads, e, i, clips.classes[i], clips.azimuths[i]))
            .collect();
        let (va, ve) = val_metrics(&preds);
        let score = match (va, ve) {
            (Some(a), Some(e)) => (100.0 - a) / 100.0 + e / 180.0,
            _ => f64::NEG_INFINITY,
        };
        if score < best_score || (score == f64::NEG_INFINITY) {
            best_score = score;
            best = (model.encoder.clone(), model.heads.clone());
            best_epoch = epoch;
        }
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: total / batches.len() as f64,
            val_accuracy: va,
            val_error: ve,
        });
    }
    let last_heads = model.heads.clone();
    model.encoder = best.0;
    model.heads = best.1;
    Ok(TrainOutcome {
        model,
        last_heads,
        history,
        best_epochs: (best_epoch, best_epoch),
        labeled_hours,
    })
}

/// Scores every test clip (center crop, no augmentation) in parallel.
pub fn evaluate_predictions(model: &EvalModel, test: &Manifest) -> Result<Vec<ItemPrediction>> {
    if test.is_empty() {
        return Err(Error::Data("test manifest is empty".into()));
    }
    let ex = model.extractor()?;
    let clips = Clips::load(test)?;
    clips.check_classes(model.heads.n_classes())?;
    let idx: Vec<usize> = (0..test.len()).collect();
    let embs = embed_all(&model.encoder, &clips, &idx, &ChannelSwapArrangement::IDENTITY, &ex, &model.standardizer)?;
    Ok(idx
        .iter()
        .zip(&embs)
        .map(|(&i, e)| predict(&model.heads, e, i, clips.classes[i], clips.azimuths[i]))
        .collect())
}

pub fn evaluate(model: &EvalModel, test: &Manifest, name: &str, protocol: &EvalProtocol, labeled_hours: f64) -> Result<(EvalReport, Vec<ItemPrediction>)> {
    let preds = evaluate_predictions(model, test)?;
    let (accuracy_percent, azimuth_error_deg) = summarize(&preds)?;
    let report = EvalReport {
        name: name.to_string(),
        protocol: protocol.mode.label().into(),
        encoder_init: match protocol.init {
            EncoderInit::Pretrained(_) => "pretrained".into(),
            EncoderInit::Random => "random".into(),
        },
        accuracy_percent,
        azimuth_error_deg,
        error_statistic: "mean".into(),
        labeled_hours,
        n_test: preds.len(),
        seed: protocol.seed,
    };
    Ok((report, preds))
}
