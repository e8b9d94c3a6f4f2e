use crate::error::{Error, Result};
use crate::features::FeatureStack;

/// Floor on a channel's standard deviation.
pub const STD_FLOOR: f32 = 1e-6;

/// Per-channel mean and standard deviation of feature stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Standardizer {
    pub fn identity(n_channels: usize) -> Self {
        Self {
            mean: vec![0.0; n_channels],
            std: vec![1.0; n_channels],
        }
    }

    /// Statistics over every bin of every stack.
    pub fn fit<'a>(stacks: impl IntoIterator<Item = &'a FeatureStack>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for s in stacks {
            if sum.is_empty() {
                sum = vec![0.0; s.n_channels()];
                sq = vec![0.0; s.n_channels()];
            } else if s.n_channels() != sum.len() {
                return Err(Error::Size(format!("{} channels, expected {}", s.n_channels(), sum.len())));
            }
            for c in 0..s.n_channels() {
                for &v in s.channel(c) {
                    sum[c] += v as f64;
                    sq[c] += (v as f64) * (v as f64);
                }
            }
            count += s.n_freq() * s.n_frames();
        }
        if count == 0 {
            return Err(Error::Data("no feature stacks to fit standardization on".into()));
        }
        let n = count as f64;
        let mean: Vec<f32> = sum.iter().map(|s| (s / n) as f32).collect();
        let std = sum
            .iter()
            .zip(&sq)
            .map(|(s, q)| ((q / n - (s / n).powi(2)).max(0.0).sqrt() as f32).max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }

    /// Standardized copy of the stack's data, `C × F × T`.
    pub fn apply(&self, stack: &FeatureStack) -> Result<Vec<f32>> {
        if stack.n_channels() != self.n_channels() {
            return Err(Error::Size(format!(
                "stack has {} channels, standardizer {}",
                stack.n_channels(),
                self.n_channels()
            )));
        }
        let mut out = Vec::with_capacity(stack.data().len());
        for c in 0..stack.n_channels() {
            let (m, s) = (self.mean[c], self.std[c]);
            out.extend(stack.channel(c).iter().map(|&v| (v - m) / s));
        }
        Ok(out)
    }
}
