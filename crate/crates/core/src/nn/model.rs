use rayon::prelude::*;

use super::layers::{
    avg_pool2, avg_pool2_backward, pooled, relu, relu_backward, mean_pool, mean_pool_backward, Conv2d, Linear,
};
use super::{ParamView, Params, Scalar};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const EMBEDDING_DIM: usize = 128;
pub const CONV_WIDTHS: [usize; 3] = [32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub n_freq: usize,
    pub widths: [usize; 3],
    pub embedding_dim: usize,
}

impl EncoderConfig {
    /// Encoder for a `C × F × T` stack; `T` may vary between calls.
    pub fn for_input(in_channels: usize, n_freq: usize) -> Self {
        Self {
            in_channels,
            n_freq,
            widths: CONV_WIDTHS,
            embedding_dim: EMBEDDING_DIM,
        }
    }

    /// Frequency rows left after the three pooling stages.
    pub fn pooled_freq(&self) -> usize {
        self.n_freq >> 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.pooled_freq() == 0 || self.embedding_dim == 0 {
            return Err(Error::Config(format!("encoder config {self:?} is degenerate")));
        }
        Ok(())
    }
}

/// Three conv/ReLU/pool blocks, global average pooling, then a linear map to the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub config: EncoderConfig,
    pub convs: [Conv2d<T>; 3],
    pub fc: Linear<T>,
}

/// Activations kept for the backward pass of one example.
pub struct EncoderCache<T> {
    input: Vec<T>,
    /// Pre-activations of each conv block.
    pre: [Vec<T>; 3],
    /// Pooled outputs of blocks 1 and 2 (inputs to convs 2 and 3).
    pooled: [Vec<T>; 2],
    /// `(h, w)` at the input of each block, plus after the last pooling.
    dims: [(usize, usize); 4],
    summary: Vec<T>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(config: EncoderConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let [w1, w2, w3] = config.widths;
        let convs = [
            Conv2d::new(config.in_channels, w1, rng),
            Conv2d::new(w1, w2, rng),
            Conv2d::new(w2, w3, rng),
        ];
        let fc = Linear::new(w3, config.embedding_dim, rng);
        Ok(Self { config, convs, fc })
    }

    fn check_input(&self, x: &[T], n_frames: usize) -> Result<()> {
        let expect = self.config.in_channels * self.config.n_freq * n_frames;
        if x.len() != expect || n_frames < 8 {
            return Err(Error::Size(format!(
                "encoder expects {}x{}x{} (T >= 8), got {} values",
                self.config.in_channels,
                self.config.n_freq,
                n_frames,
                x.len()
            )));
        }
        Ok(())
    }

    /// Embedding of one `C × F × T` example with the activations needed for backward.
    pub fn forward_cached(&self, x: &[T], n_frames: usize) -> Result<(Vec<T>, EncoderCache<T>)> {
        self.check_input(x, n_frames)?;
        let mut dims = [(0, 0); 4];
        dims[0] = (self.config.n_freq, n_frames);
        let mut pre: [Vec<T>; 3] = Default::default();
        let mut pooled_out: [Vec<T>; 2] = Default::default();
        let mut cur = x.to_vec();
        for (i, conv) in self.convs.iter().enumerate() {
            let (h, w) = dims[i];
            let z = conv.forward(&cur, h, w);
            let p = avg_pool2(&relu(&z), conv.out_channels, h, w);
            dims[i + 1] = pooled(h, w);
            pre[i] = z;
            if i < 2 {
                pooled_out[i] = p.clone();
            }
            cur = p;
        }
        let (hf, wf) = dims[3];
        let summary = mean_pool(&cur, self.config.widths[2], hf * wf);
        let emb = self.fc.forward(&summary);
        Ok((
            emb,
            EncoderCache {
                input: x.to_vec(),
                pre,
                pooled: pooled_out,
                dims,
                summary,
            },
        ))
    }

    pub fn forward(&self, x: &[T], n_frames: usize) -> Result<Vec<T>> {
        Ok(self.forward_cached(x, n_frames)?.0)
    }

    /// Embeddings of many examples, computed in parallel, returned in input order.
    pub fn forward_batch(&self, xs: &[&[T]], n_frames: usize) -> Result<Vec<Vec<T>>> {
        xs.par_iter().map(|x| self.forward(x, n_frames)).collect()
    }

    /// Adds this example's parameter gradients to `grad`; returns the input gradient when asked.
    pub fn backward(&self, cache: &EncoderCache<T>, d_emb: &[T], grad: &mut Encoder<T>, need_dx: bool) -> Option<Vec<T>> {
        let d_summary = self.fc.backward(&cache.summary, d_emb, &mut grad.fc, true).expect("dx requested");
        let (hf, wf) = cache.dims[3];
        let mut d = mean_pool_backward(&d_summary, hf * wf);
        for i in (0..3).rev() {
            let conv = &self.convs[i];
            let (h, w) = cache.dims[i];
            let d_relu = avg_pool2_backward(&d, conv.out_channels, h, w);
            let dz = relu_backward(&cache.pre[i], &d_relu);
            let input = if i == 0 { &cache.input } else { &cache.pooled[i - 1] };
            let want = i > 0 || need_dx;
            match conv.backward(input, h, w, &dz, &mut grad.convs[i], want) {
                Some(dx) => d = dx,
                None => return None,
            }
        }
        Some(d)
    }
}

impl<T: Scalar> Params<T> for Encoder<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            for p in c.params() {
                out.push(ParamView {
                    name: format!("encoder.conv{}.{}", i + 1, p.name),
                    ..p
                });
            }
        }
        for p in self.fc.params() {
            out.push(ParamView {
                name: format!("encoder.fc.{}", p.name),
                ..p
            });
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for c in self.convs.iter_mut() {
            out.extend(c.params_mut());
        }
        out.extend(self.fc.params_mut());
        out
    }
}

/// Two-layer perceptron on top of the embedding, used only for the contrastive loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
}

pub struct ProjectorCache<T> {
    h: Vec<T>,
    pre: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Scalar> Projector<T> {
    pub fn new(dim: usize, rng: &mut RngStream) -> Self {
        Self {
            l1: Linear::new(dim, dim, rng),
            l2: Linear::new(dim, dim, rng),
        }
    }

    pub fn forward_cached(&self, h: &[T]) -> (Vec<T>, ProjectorCache<T>) {
        let pre = self.l1.forward(h);
        let hidden = relu(&pre);
        let z = self.l2.forward(&hidden);
        (
            z,
            ProjectorCache {
                h: h.to_vec(),
                pre,
                hidden,
            },
        )
    }

    pub fn backward(&self, cache: &ProjectorCache<T>, dz: &[T], grad: &mut Projector<T>) -> Vec<T> {
        let dhidden = self.l2.backward(&cache.hidden, dz, &mut grad.l2, true).expect("dx requested");
        let dpre = relu_backward(&cache.pre, &dhidden);
        self.l1.backward(&cache.h, &dpre, &mut grad.l1, true).expect("dx requested")
    }
}

impl<T: Scalar> Params<T> for Projector<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut out = Vec::new();
        for (tag, l) in [("l1", &self.l1), ("l2", &self.l2)] {
            for p in l.params() {
                out.push(ParamView {
                    name: format!("projector.{tag}.{}", p.name),
                    ..p
                });
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.l1.params_mut();
        out.extend(self.l2.params_mut());
        out
    }
}

/// Classification and azimuth heads on the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads<T> {
    pub classifier: Linear<T>,
    /// Predicts `(cos θ, sin θ)`.
    pub localizer: Linear<T>,
}

impl<T: Scalar> Heads<T> {
    pub fn new(dim: usize, n_classes: usize, rng: &mut RngStream) -> Self {
        Self {
            classifier: Linear::new(dim, n_classes, rng),
            localizer: Linear::new(dim, 2, rng),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.out_features
    }
}

impl<T: Scalar> Params<T> for Heads<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut out = Vec::new();
        for (tag, l) in [("classifier", &self.classifier), ("localizer", &self.localizer)] {
            for p in l.params() {
                out.push(ParamView {
                    name: format!("heads.{tag}.{}", p.name),
                    ..p
                });
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.classifier.params_mut();
        out.extend(self.localizer.params_mut());
        out
    }
}
