use crate::error::{Error, Result};
use crate::nn::Scalar;

/// Floor on projection norms before cosine similarity.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtXentConfig {
    pub temperature: f64,
}

impl Default for NtXentConfig {
    fn default() -> Self {
        Self { temperature: 0.1 }
    }
}

/// Loss value and its gradient with respect to every projection row.
#[derive(Debug, Clone)]
pub struct NtXentOutput<T> {
    pub loss: f64,
    pub grads: Vec<Vec<T>>,
    /// Mean cosine similarity between pairmates.
    pub positive_similarity: f64,
}

/// Normalized temperature-scaled cross-entropy over `2N` projections where rows
/// `2m` and `2m + 1` form the `m`-th positive pair. The loss is averaged over all
/// `2N` anchors.
pub fn nt_xent<T: Scalar>(z: &[Vec<T>], cfg: &NtXentConfig) -> Result<NtXentOutput<T>> {
    let n2 = z.len();
    if n2 < 2 || n2 % 2 != 0 {
        return Err(Error::Size(format!("NT-Xent needs an even number (>= 2) of rows, got {n2}")));
    }
    if cfg.temperature <= 0.0 {
        return Err(Error::Config(format!("temperature {} must be positive", cfg.temperature)));
    }
    let d = z[0].len();
    let mut u = vec![vec![0.0f64; d]; n2];
    let mut norms = vec![0.0f64; n2];
    for (i, row) in z.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Size(format!("projection row {i} has {} values, expected {d}", row.len())));
        }
        let v: Vec<f64> = row.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numeric(format!("projection row {i} is not finite")));
        }
        if norm == 0.0 {
            return Err(Error::Numeric(format!("projection row {i} has zero norm")));
        }
        norms[i] = norm.max(NORM_EPS);
        u[i] = v.iter().map(|x| x / norms[i]).collect();
    }
    let inv_t = 1.0 / cfg.temperature;
    let mut s = vec![vec![0.0f64; n2]; n2];
    for i in 0..n2 {
        for k in i..n2 {
            let v = u[i].iter().zip(&u[k]).map(|(a, b)| a * b).sum::<f64>() * inv_t;
            s[i][k] = v;
            s[k][i] = v;
        }
    }
    // g[i][k] = dL/ds_ik
    let scale = 1.0 / n2 as f64;
    let mut g = vec![vec![0.0f64; n2]; n2];
    let mut loss = 0.0;
    let mut pos = 0.0;
    for i in 0..n2 {
        let p = i ^ 1;
        let max = (0..n2).filter(|&k| k != i).map(|k| s[i][k]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..n2).filter(|&k| k != i).map(|k| (s[i][k] - max).exp()).sum();
        let lse = max + denom.ln();
        loss += lse - s[i][p];
        pos += s[i][p] * cfg.temperature;
        for k in 0..n2 {
            if k == i {
                continue;
            }
            let soft = (s[i][k] - lse).exp();
            g[i][k] = scale * (soft - if k == p { 1.0 } else { 0.0 });
        }
    }
    let grads = (0..n2)
        .map(|i| {
            // dL/du_i = Σ_k (g_ik + g_ki) u_k / τ
            let mut du = vec![0.0f64; d];
            for k in 0..n2 {
                let c = (g[i][k] + g[k][i]) * inv_t;
                if c != 0.0 {
                    du.iter_mut().zip(&u[k]).for_each(|(a, b)| *a += c * b);
                }
            }
            // through u = z / |z|
            let proj = du.iter().zip(&u[i]).map(|(a, b)| a * b).sum::<f64>();
            du.iter()
                .zip(&u[i])
                .map(|(a, b)| T::from_f64c((a - proj * b) / norms[i]))
                .collect()
        })
        .collect();
    Ok(NtXentOutput {
        loss: loss * scale,
        grads,
        positive_similarity: pos * scale,
    })
}
