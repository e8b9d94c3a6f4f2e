//! Augmentations for positive pairs: channel rearrangement and Mixup on the
//! waveform, random resized crop and channel drop on the feature stack.

pub mod crop;
pub mod drop;
pub mod mixup;
pub mod plan;
pub mod swap;

pub use crop::{random_resized_crop, resize_crop, sample_window, CropWindow, RrcParams};
pub use drop::{channel_drop, drop_mask, ChannelDropParams};
pub use mixup::{mix_normalized, mixup, MixupParams};
pub use plan::{apply_plan, apply_plan_traced, AugmentationPlan, BackgroundPool, PlanTrace, RecordingPool};
pub use swap::{channel_swap, sample_arrangement, ChannelSwapArrangement, N_ARRANGEMENTS};
