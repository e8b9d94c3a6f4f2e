use super::crop::{random_resized_crop_with_window, CropWindow, RrcParams};
use super::drop::{apply_mask, drop_mask, ChannelDropParams};
use super::mixup::{mixup, MixupParams};
use super::swap::{channel_swap, sample_arrangement, ChannelSwapArrangement};
use crate::audio::{crop_offsets, MultiChannelWaveform, Patch, SourceId};
use crate::error::Result;
use crate::features::{FeatureExtractor, FeatureStack};
use crate::rng::RngStream;

/// Which augmentations run and with what parameters. The order is always
/// ChannelSwap, Mixup, feature extraction, RandomResizedCrop, ChannelDrop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPlan {
    pub channel_swap: bool,
    pub mixup: bool,
    pub random_resized_crop: bool,
    pub channel_drop: bool,
    pub mixup_params: MixupParams,
    pub rrc_params: RrcParams,
    pub drop_params: ChannelDropParams,
}

impl AugmentationPlan {
    pub fn full() -> Self {
        Self {
            channel_swap: true,
            mixup: true,
            random_resized_crop: true,
            channel_drop: true,
            mixup_params: MixupParams::default(),
            rrc_params: RrcParams::default(),
            drop_params: ChannelDropParams::default(),
        }
    }

    pub fn none() -> Self {
        Self {
            channel_swap: false,
            mixup: false,
            random_resized_crop: false,
            channel_drop: false,
            ..Self::full()
        }
    }

    pub fn swap_only() -> Self {
        Self {
            channel_swap: true,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mixup_params.validate()?;
        self.rrc_params.validate()?;
        self.drop_params.validate()
    }

    /// Short tag such as `CS+MU+RRC+CD` (or `none`).
    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.channel_swap, "CS"),
            (self.mixup, "MU"),
            (self.random_resized_crop, "RRC"),
            (self.channel_drop, "CD"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self::full()
    }
}

/// Supplies Mixup backgrounds.
pub trait BackgroundPool {
    /// A background of `n_samples` samples from a recording other than `exclude`,
    /// or `None` when there is no such recording.
    fn draw(&self, exclude: SourceId, n_samples: usize, rng: &mut RngStream) -> Option<MultiChannelWaveform>;
}

/// Backgrounds cut at random offsets from a set of loaded recordings.
pub struct RecordingPool<'a> {
    items: Vec<(SourceId, &'a MultiChannelWaveform)>,
}

impl<'a> RecordingPool<'a> {
    pub fn new(items: Vec<(SourceId, &'a MultiChannelWaveform)>) -> Self {
        Self { items }
    }

    pub fn empty() -> Self {
        Self { items: Vec::new() }
    }
}

impl BackgroundPool for RecordingPool<'_> {
    fn draw(&self, exclude: SourceId, n_samples: usize, rng: &mut RngStream) -> Option<MultiChannelWaveform> {
        let candidates: Vec<&MultiChannelWaveform> =
            self.items.iter().filter(|(id, _)| *id != exclude).map(|(_, w)| *w).collect();
        if candidates.is_empty() {
            return None;
        }
        let w = candidates[rng.below(candidates.len())];
        let offset = rng.below(crop_offsets(w.len(), n_samples));
        Some(w.window(offset, n_samples))
    }
}

/// Random choices made for one patch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatchTrace {
    pub mixup_alpha: Option<f64>,
    pub crop: Option<CropWindow>,
    pub dropped: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanTrace {
    pub arrangement: Option<ChannelSwapArrangement>,
    pub patches: [PatchTrace; 2],
}

/// Augments both patches of a positive pair and extracts their feature stacks.
pub fn apply_plan(
    pair: (&Patch, &Patch),
    pool: &dyn BackgroundPool,
    plan: &AugmentationPlan,
    extractor: &FeatureExtractor,
    rng: &mut RngStream,
) -> Result<(FeatureStack, FeatureStack)> {
    let (a, b, _) = apply_plan_traced(pair, pool, plan, extractor, rng)?;
    Ok((a, b))
}

/// [`apply_plan`] that also reports every random choice it made.
pub fn apply_plan_traced(
    pair: (&Patch, &Patch),
    pool: &dyn BackgroundPool,
    plan: &AugmentationPlan,
    extractor: &FeatureExtractor,
    rng: &mut RngStream,
) -> Result<(FeatureStack, FeatureStack, PlanTrace)> {
    let arrangement = plan.channel_swap.then(|| sample_arrangement(rng));
    let mut streams = [rng.fork(), rng.fork()];
    let mut trace = PlanTrace {
        arrangement,
        ..PlanTrace::default()
    };
    let mut out = Vec::with_capacity(2);
    for (k, patch) in [pair.0, pair.1].into_iter().enumerate() {
        let r = &mut streams[k];
        let t = &mut trace.patches[k];
        let mut w = match &arrangement {
            Some(arr) => channel_swap(&patch.waveform, arr)?,
            None => patch.waveform.clone(),
        };
        if plan.mixup {
            let alpha = plan.mixup_params.sample_alpha(r);
            if let Some(bg) = pool.draw(patch.source_id, w.len(), r) {
                w = mixup(&w, &bg, alpha, &plan.mixup_params)?;
                t.mixup_alpha = Some(alpha);
            }
        }
        let mut stack = extractor.extract(&Patch {
            waveform: w,
            source_id: patch.source_id,
        })?;
        if plan.random_resized_crop {
            let (cropped, window) = random_resized_crop_with_window(&stack, r, &plan.rrc_params)?;
            stack = cropped;
            t.crop = window;
        }
        if plan.channel_drop {
            let mask = drop_mask(stack.n_channels(), plan.drop_params.drop_probability, r);
            stack = apply_mask(&stack, &mask);
            t.dropped = mask;
        }
        out.push(stack);
    }
    let b = out.pop().expect("two stacks");
    let a = out.pop().expect("two stacks");
    Ok((a, b, trace))
}
