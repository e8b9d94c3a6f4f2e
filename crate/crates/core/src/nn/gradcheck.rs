//! Central finite-difference checks of analytic gradients.

use super::Params;
use crate::rng::RngStream;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so that gradients which are zero up
/// to rounding do not blow it up.
pub const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    pub fn rel_error(&self) -> f64 {
        rel_error(self.analytic, self.numeric)
    }
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.probes.iter().map(Probe::rel_error).fold(0.0, f64::max)
    }
}

/// Compares `analytic` against central differences of `loss` at `n_probes`
/// randomly chosen coordinates of `params`.
pub fn check_params<P: Params<f64>>(
    params: &P,
    analytic: &P,
    loss: impl Fn(&P) -> f64,
    n_probes: usize,
    rng: &mut RngStream,
) -> GradCheckReport {
    let views = params.params();
    let sizes: Vec<usize> = views.iter().map(|v| v.data.len()).collect();
    let names: Vec<String> = views.iter().map(|v| v.name.clone()).collect();
    drop(views);
    let flat0 = params.flat();
    let grad = analytic.flat();
    let mut work = params.clone();
    let mut probes = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let i = rng.below(flat0.len());
        let mut flat = flat0.clone();
        flat[i] = flat0[i] + FD_STEP;
        work.set_flat(&flat).expect("same size");
        let up = loss(&work);
        flat[i] = flat0[i] - FD_STEP;
        work.set_flat(&flat).expect("same size");
        let down = loss(&work);
        let (mut t, mut off) = (0, i);
        while off >= sizes[t] {
            off -= sizes[t];
            t += 1;
        }
        probes.push(Probe {
            name: names[t].clone(),
            index: off,
            analytic: grad[i],
            numeric: (up - down) / (2.0 * FD_STEP),
        });
    }
    GradCheckReport { probes }
}

/// Central differences of `loss` with respect to each coordinate of `x`.
pub fn numeric_input_grad(x: &[f64], loss: impl Fn(&[f64]) -> f64, indices: &[usize]) -> Vec<f64> {
    let mut work = x.to_vec();
    indices
        .iter()
        .map(|&i| {
            work[i] = x[i] + FD_STEP;
            let up = loss(&work);
            work[i] = x[i] - FD_STEP;
            let down = loss(&work);
            work[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{avg_pool2, avg_pool2_backward, relu, relu_backward, mean_pool, mean_pool_backward};
    use crate::nn::{Conv2d, Linear};

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn random(rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gaussian()).collect()
    }

    #[test]
    fn linear_layer() {
        let mut rng = RngStream::new(1);
        let mut lin = Linear::<f64>::new(7, 5, &mut rng);
        lin.bias = random(&mut rng, 5);
        let x = random(&mut rng, 7);
        let w = random(&mut rng, 5);
        let loss = |l: &Linear<f64>| dot(&l.forward(&x), &w);
        let mut g = lin.zeros_like();
        let dx = lin.backward(&x, &w, &mut g, true).unwrap();
        let rep = check_params(&lin, &g, loss, 20, &mut rng);
        assert!(rep.max_rel_error() < 1e-4, "{rep:?}");
        let num = numeric_input_grad(&x, |xx| dot(&lin.forward(xx), &w), &[0, 3, 6]);
        for (k, &i) in [0, 3, 6].iter().enumerate() {
            assert!(rel_error(dx[i], num[k]) < 1e-4);
        }
    }

    #[test]
    fn conv_layer() {
        let mut rng = RngStream::new(2);
        let mut conv = Conv2d::<f64>::new(3, 4, &mut rng);
        conv.bias = random(&mut rng, 4);
        let (h, w) = (5, 6);
        let x = random(&mut rng, 3 * h * w);
        let up = random(&mut rng, 4 * h * w);
        let mut g = conv.zeros_like();
        let dx = conv.backward(&x, h, w, &up, &mut g, true).unwrap();
        let rep = check_params(&conv, &g, |c| dot(&c.forward(&x, h, w), &up), 20, &mut rng);
        assert!(rep.max_rel_error() < 1e-4, "{rep:?}");
        let idx: Vec<usize> = (0..10).map(|_| rng.below(x.len())).collect();
        let num = numeric_input_grad(&x, |xx| dot(&conv.forward(xx, h, w), &up), &idx);
        for (k, &i) in idx.iter().enumerate() {
            assert!(rel_error(dx[i], num[k]) < 1e-4);
        }
    }

    #[test]
    fn parameter_free_layers() {
        let mut rng = RngStream::new(3);
        let (c, h, w) = (2, 5, 7);
        let x = random(&mut rng, c * h * w);
        let idx: Vec<usize> = (0..x.len()).collect();

        let up = random(&mut rng, c * 2 * 3);
        let dx = avg_pool2_backward(&up, c, h, w);
        let num = numeric_input_grad(&x, |xx| dot(&avg_pool2(xx, c, h, w), &up), &idx);
        assert!(dx.iter().zip(&num).all(|(a, b)| (a - b).abs() < 1e-8));

        let up = random(&mut rng, c * h);
        let dx = mean_pool_backward(&up, w);
        let num = numeric_input_grad(&x, |xx| dot(&mean_pool(xx, c * h, w), &up), &idx);
        assert!(dx.iter().zip(&num).all(|(a, b)| rel_error(*a, *b) < 1e-4));

        let up = random(&mut rng, x.len());
        let dx = relu_backward(&x, &up);
        let num = numeric_input_grad(&x, |xx| dot(&relu(xx), &up), &idx);
        assert!(dx.iter().zip(&num).all(|(a, b)| rel_error(*a, *b) < 1e-4));
    }
}
