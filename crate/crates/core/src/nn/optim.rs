use super::{Params, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

/// Momentum buffers, one per parameter, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<P> {
    pub config: SgdConfig,
    pub velocity: P,
}

impl<P> OptimizerState<P> {
    pub fn new<T: Scalar>(params: &P, config: SgdConfig) -> Self
    where
        P: Params<T>,
    {
        Self {
            config,
            velocity: params.zeros_like(),
        }
    }
}

/// `v ← m·v + g + wd·p`, then `p ← p − lr·v`. Fails without touching anything if a
/// gradient is not finite.
pub fn sgd_step<T: Scalar, P: Params<T>>(params: &mut P, grads: &P, state: &mut OptimizerState<P>, lr: f64) -> Result<()> {
    let gviews = grads.params();
    if let Some(bad) = gviews.iter().find(|g| g.data.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric(format!("non-finite gradient in {}", bad.name)));
    }
    let g: Vec<&[T]> = gviews.iter().map(|v| v.data).collect();
    let m = T::from_f64c(state.config.momentum);
    let wd = T::from_f64c(state.config.weight_decay);
    let lr = T::from_f64c(lr);
    for ((p, v), g) in params.params_mut().into_iter().zip(state.velocity.params_mut()).zip(g) {
        for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = m * *v + g + wd * *p;
            *p = *p - lr * *v;
        }
    }
    Ok(())
}

/// Multiplies gradients by `factor` in place.
pub fn grad_scale<T: Scalar, P: Params<T>>(grads: &mut P, factor: f64) {
    if factor != 1.0 {
        grads.scale(T::from_f64c(factor));
    }
}

/// Linear warmup over `warmup_epochs`, then cosine decay to zero at `total_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> Self {
        Self {
            base_lr,
            warmup_epochs,
            total_epochs,
        }
    }
}

pub fn lr_at(epoch: usize, sched: &LrSchedule) -> f64 {
    let (w, t) = (sched.warmup_epochs, sched.total_epochs);
    if epoch < w {
        return sched.base_lr * (epoch + 1) as f64 / w as f64;
    }
    if t <= w {
        return sched.base_lr;
    }
    let progress = (epoch - w) as f64 / (t - w) as f64;
    sched.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}
