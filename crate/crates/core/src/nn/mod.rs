//! Small forward/backward engine for the encoder, projector and linear heads.
//!
//! Everything is generic over [`Scalar`]: training runs in `f32`, gradient
//! checks in `f64`. Activations are laid out channel-major (`C × F × T`, time
//! fastest) and every layer processes one example at a time; batches are a
//! parallel map over examples followed by an ordered gradient sum, so results do
//! not depend on the thread count.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod standardize;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use layers::{Conv2d, Linear};
pub use model::{Encoder, EncoderCache, EncoderConfig, Heads, Projector, ProjectorCache};
pub use optim::{grad_scale, lr_at, sgd_step, LrSchedule, OptimizerState, SgdConfig};
pub use standardize::Standardizer;

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Floating-point type the engine runs in.
pub trait Scalar: Float + FromPrimitive + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    /// `C ← α·op(A)·op(B) + β·C` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: callers pass slices whose extents cover every strided index
                // (checked by the debug assertions in `matmul`).
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Row-major matrix view, optionally read transposed.
#[derive(Clone, Copy)]
pub struct Mat<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
}

impl<'a, T> Mat<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { data, rows, cols }
    }
}

/// `C (m×n) = op(A)·op(B)` or `C += op(A)·op(B)` when `accumulate`.
pub fn matmul<T: Scalar>(a: Mat<T>, ta: bool, b: Mat<T>, tb: bool, c: &mut [T], accumulate: bool) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.len(), m * n, "output buffer has wrong size");
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = T::zero());
        }
        return;
    }
    T::gemm_raw(m, k, n, T::one(), a.data, rsa, csa, b.data, rsb, csb, beta, c, n as isize, 1);
}

/// A named parameter tensor.
pub struct ParamView<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

/// Anything made of parameter tensors. Gradients and momentum buffers are
/// stored in a value of the same type.
pub trait Params<T: Scalar>: Clone {
    fn params(&self) -> Vec<ParamView<'_, T>>;
    fn params_mut(&mut self) -> Vec<&mut [T]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(T::zero());
        z
    }

    fn fill(&mut self, v: T) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|x| *x = v);
        }
    }

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    /// `self += other`.
    fn add_assign(&mut self, other: &Self) {
        let src: Vec<Vec<T>> = other.params().iter().map(|p| p.data.to_vec()).collect();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            dst.iter_mut().zip(s).for_each(|(d, v)| *d = *d + v);
        }
    }

    fn scale(&mut self, factor: T) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    fn flat(&self) -> Vec<T> {
        self.params().iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Size(format!("{} values for {} parameters", flat.len(), self.n_params())));
        }
        let mut off = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[off..off + p.len()]);
            off += p.len();
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

/// Sums per-example gradients in order.
pub fn sum_in_order<T: Scalar, P: Params<T>>(mut parts: Vec<P>) -> Option<P> {
    let mut it = parts.drain(..);
    let mut acc = it.next()?;
    for p in it {
        acc.add_assign(&p);
    }
    Some(acc)
}

/// Converts between precisions, parameter by parameter.
pub fn convert<A: Scalar, B: Scalar, P: Params<A>, Q: Params<B>>(src: &P, dst: &mut Q) -> Result<()> {
    let flat: Vec<B> = src.flat().iter().map(|v| B::from_f64c(v.to_f64().unwrap_or(f64::NAN))).collect();
    dst.set_flat(&flat)
}
