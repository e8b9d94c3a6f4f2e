use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelDropParams {
    pub drop_probability: f64,
}

impl Default for ChannelDropParams {
    fn default() -> Self {
        Self { drop_probability: 0.1 }
    }
}

impl ChannelDropParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::Config(format!(
                "channel drop probability {} not in [0, 1]",
                self.drop_probability
            )));
        }
        Ok(())
    }
}

/// One independent Bernoulli(`p`) draw per channel; `true` means dropped.
pub fn drop_mask(n_channels: usize, p: f64, rng: &mut RngStream) -> Vec<bool> {
    (0..n_channels).map(|_| rng.bernoulli(p)).collect()
}

/// Zeroes whole channels independently with probability `p`.
pub fn channel_drop(stack: &FeatureStack, rng: &mut RngStream, params: &ChannelDropParams) -> FeatureStack {
    let mask = drop_mask(stack.n_channels(), params.drop_probability, rng);
    apply_mask(stack, &mask)
}

pub fn apply_mask(stack: &FeatureStack, mask: &[bool]) -> FeatureStack {
    let mut out = stack.clone();
    for (c, &dropped) in mask.iter().enumerate() {
        if dropped {
            out.channel_mut(c).fill(0.0);
        }
    }
    out
}
