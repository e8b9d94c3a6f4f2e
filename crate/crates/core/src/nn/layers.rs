use super::{matmul, Mat, ParamView, Params, Scalar};
use crate::rng::RngStream;

/// 3×3 convolution, stride 1, zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `out × (in · 9)`, kernel index `ci·9 + ky·3 + kx`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

fn kaiming<T: Scalar>(n: usize, fan_in: usize, rng: &mut RngStream) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| T::from_f64c(rng.uniform(-bound, bound))).collect()
}

/// Unfolds 3×3 neighborhoods: row `ci·9 + ky·3 + kx`, column `y·w + x`.
pub fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut cols = vec![T::zero(); c * 9 * hw];
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    // dst[x] = src[x + kx - 1]
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates columns back onto the image.
pub fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut x = vec![T::zero(); c * hw];
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    let (d, s) = match kx {
                        0 => (&mut dst[..w - 1], &src[1..]),
                        1 => (&mut dst[..], &src[..]),
                        _ => (&mut dst[1..], &src[..w - 1]),
                    };
                    d.iter_mut().zip(s).for_each(|(a, &b)| *a = *a + b);
                }
            }
        }
    }
    x
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut RngStream) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: kaiming(out_channels * in_channels * 9, in_channels * 9, rng),
            bias: vec![T::zero(); out_channels],
        }
    }

    /// `x` is `in × h × w`; returns `out × h × w`.
    pub fn forward(&self, x: &[T], h: usize, w: usize) -> Vec<T> {
        assert_eq!(x.len(), self.in_channels * h * w, "conv input size");
        let cols = im2col(x, self.in_channels, h, w);
        let hw = h * w;
        let mut out = vec![T::zero(); self.out_channels * hw];
        for (o, b) in self.bias.iter().enumerate() {
            out[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v = *b);
        }
        let k = self.in_channels * 9;
        matmul(Mat::new(&self.weight, self.out_channels, k), false, Mat::new(&cols, k, hw), false, &mut out, true);
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient when asked.
    pub fn backward(&self, x: &[T], h: usize, w: usize, dout: &[T], grad: &mut Conv2d<T>, need_dx: bool) -> Option<Vec<T>> {
        let hw = h * w;
        let k = self.in_channels * 9;
        let cols = im2col(x, self.in_channels, h, w);
        let dmat = Mat::new(dout, self.out_channels, hw);
        matmul(dmat, false, Mat::new(&cols, k, hw), true, &mut grad.weight, true);
        for (o, gb) in grad.bias.iter_mut().enumerate() {
            *gb = *gb + dout[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![T::zero(); k * hw];
        matmul(Mat::new(&self.weight, self.out_channels, k), true, dmat, false, &mut dcols, false);
        Some(col2im(&dcols, self.in_channels, h, w))
    }
}

impl<T: Scalar> Params<T> for Conv2d<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            ParamView {
                name: "weight".into(),
                shape: vec![self.out_channels, self.in_channels, 3, 3],
                data: &self.weight,
            },
            ParamView {
                name: "bias".into(),
                shape: vec![self.out_channels],
                data: &self.bias,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fully connected layer, weight `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut RngStream) -> Self {
        Self {
            in_features,
            out_features,
            weight: kaiming(out_features * in_features, in_features, rng),
            bias: vec![T::zero(); out_features],
        }
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: vec![T::zero(); out_features * in_features],
            bias: vec![T::zero(); out_features],
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.in_features, "linear input size");
        let mut y = self.bias.clone();
        matmul(
            Mat::new(&self.weight, self.out_features, self.in_features),
            false,
            Mat::new(x, self.in_features, 1),
            false,
            &mut y,
            true,
        );
        y
    }

    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Linear<T>, need_dx: bool) -> Option<Vec<T>> {
        matmul(
            Mat::new(dy, self.out_features, 1),
            false,
            Mat::new(x, 1, self.in_features),
            false,
            &mut grad.weight,
            true,
        );
        grad.bias.iter_mut().zip(dy).for_each(|(g, &d)| *g = *g + d);
        need_dx.then(|| {
            let mut dx = vec![T::zero(); self.in_features];
            matmul(
                Mat::new(&self.weight, self.out_features, self.in_features),
                true,
                Mat::new(dy, self.out_features, 1),
                false,
                &mut dx,
                false,
            );
            dx
        })
    }
}

impl<T: Scalar> Params<T> for Linear<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            ParamView {
                name: "weight".into(),
                shape: vec![self.out_features, self.in_features],
                data: &self.weight,
            },
            ParamView {
                name: "bias".into(),
                shape: vec![self.out_features],
                data: &self.bias,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn relu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// Gradient through ReLU given the pre-activation; the subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(pre: &[T], dy: &[T]) -> Vec<T> {
    pre.iter().zip(dy).map(|(&p, &d)| if p > T::zero() { d } else { T::zero() }).collect()
}

/// Output size of 2×2 average pooling (floor).
pub fn pooled(h: usize, w: usize) -> (usize, usize) {
    (h / 2, w / 2)
}

/// 2×2 average pooling with stride 2 over each `h × w` plane; trailing odd rows/columns are dropped.
pub fn avg_pool2<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = pooled(h, w);
    let quarter = T::from_f64c(0.25);
    let mut out = vec![T::zero(); c * ho * wo];
    for ci in 0..c {
        let plane = &x[ci * h * w..];
        for i in 0..ho {
            let r0 = &plane[2 * i * w..];
            let r1 = &plane[(2 * i + 1) * w..];
            for j in 0..wo {
                out[(ci * ho + i) * wo + j] = quarter * (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]);
            }
        }
    }
    out
}

pub fn avg_pool2_backward<T: Scalar>(dy: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = pooled(h, w);
    let quarter = T::from_f64c(0.25);
    let mut dx = vec![T::zero(); c * h * w];
    for ci in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let g = quarter * dy[(ci * ho + i) * wo + j];
                for (dy_, dx_) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    dx[(ci * h + 2 * i + dy_) * w + 2 * j + dx_] = g;
                }
            }
        }
    }
    dx
}

/// Mean of each row of a `rows × n` block.
pub fn mean_pool<T: Scalar>(x: &[T], rows: usize, t: usize) -> Vec<T> {
    let inv = T::one() / T::from_usize(t).expect("frame count");
    (0..rows).map(|r| x[r * t..(r + 1) * t].iter().copied().sum::<T>() * inv).collect()
}

pub fn mean_pool_backward<T: Scalar>(dy: &[T], t: usize) -> Vec<T> {
    let inv = T::one() / T::from_usize(t).expect("frame count");
    dy.iter().flat_map(|&g| std::iter::repeat_n(g * inv, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(conv: &Conv2d<f64>, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let mut out = vec![0.0; conv.out_channels * h * w];
        for o in 0..conv.out_channels {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = conv.bias[o];
                    for ci in 0..conv.in_channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = y as isize + ky as isize - 1;
                                let sx = xx as isize + kx as isize - 1;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += conv.weight[o * conv.in_channels * 9 + ci * 9 + ky * 3 + kx]
                                    * x[(ci * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out[(o * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = RngStream::new(1);
        let mut conv = Conv2d::<f64>::new(3, 5, &mut rng);
        conv.bias.iter_mut().for_each(|b| *b = rng.gaussian());
        let (h, w) = (6, 7);
        let x: Vec<f64> = (0..3 * h * w).map(|_| rng.gaussian()).collect();
        let fast = conv.forward(&x, h, w);
        let slow = naive_conv(&conv, &x, h, w);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = RngStream::new(2);
        let (c, h, w) = (2, 5, 4);
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.gaussian()).collect();
        let y: Vec<f64> = (0..c * 9 * h * w).map(|_| rng.gaussian()).collect();
        let lhs: f64 = im2col(&x, c, h, w).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, c, h, w)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn pooling_floor_and_backward() {
        let x: Vec<f64> = (0..15).map(|v| v as f64).collect(); // 1 × 3 × 5
        let y = avg_pool2(&x, 1, 3, 5);
        assert_eq!(y, vec![3.0, 5.0]);
        let dx = avg_pool2_backward(&[4.0, 8.0], 1, 3, 5);
        assert_eq!(dx, vec![1.0, 1.0, 2.0, 2.0, 0.0, 1.0, 1.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_zero_subgradient() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu_backward(&[-1.0, 0.0, 2.0], &[5.0, 5.0, 5.0]), vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn mean_pool_round_trip() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(mean_pool(&x, 2, 3), vec![2.0, 5.0]);
        assert_eq!(mean_pool_backward(&[3.0, 6.0], 3), vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn kaiming_bounds_and_zero_bias() {
        let conv = Conv2d::<f32>::new(10, 32, &mut RngStream::new(3));
        let bound = (6.0f32 / 90.0).sqrt();
        assert!(conv.weight.iter().all(|w| w.abs() <= bound));
        assert!(conv.bias.iter().all(|&b| b == 0.0));
    }
}
