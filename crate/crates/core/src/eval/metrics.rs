use crate::error::{Error, Result};

/// Error assigned to a `(0, 0)` localizer output.
pub const UNINFORMATIVE_ERROR_DEG: f64 = 90.0;

/// Wraps degrees into `(-180, 180]`.
pub fn wrap_deg(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Absolute angular error in degrees between a `(cos, sin)` prediction and a label.
pub fn angular_error(pred: (f64, f64), label_deg: f64) -> f64 {
    if pred.0 == 0.0 && pred.1 == 0.0 {
        return UNINFORMATIVE_ERROR_DEG;
    }
    wrap_deg(pred.1.atan2(pred.0).to_degrees() - label_deg).abs()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ItemPrediction {
    pub index: usize,
    pub class: usize,
    pub predicted_class: usize,
    pub azimuth_deg: f64,
    pub predicted_azimuth_deg: f64,
    pub error_deg: f64,
}

impl ItemPrediction {
    pub fn new(index: usize, class: usize, logits: &[f32], loc: (f64, f64), azimuth_deg: f64) -> Self {
        Self {
            index,
            class,
            predicted_class: argmax(logits),
            azimuth_deg,
            predicted_azimuth_deg: loc.1.atan2(loc.0).to_degrees(),
            error_deg: angular_error(loc, azimuth_deg),
        }
    }
}

/// First index of the largest value.
pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Accuracy in percent and mean angular error in degrees.
pub fn summarize(preds: &[ItemPrediction]) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::Data("no items to evaluate".into()));
    }
    let n = preds.len() as f64;
    let correct = preds.iter().filter(|p| p.predicted_class == p.class).count() as f64;
    let err: f64 = preds.iter().map(|p| p.error_deg).sum();
    Ok((100.0 * correct / n, err / n))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    /// Row label for tables.
    pub name: String,
    pub protocol: String,
    pub encoder_init: String,
    pub accuracy_percent: f64,
    pub azimuth_error_deg: f64,
    /// How per-item errors are aggregated.
    pub error_statistic: String,
    pub labeled_hours: f64,
    pub n_test: usize,
    pub seed: u64,
}

pub fn predictions_csv(preds: &[ItemPrediction]) -> String {
    let mut s = String::from("index,class,predicted_class,azimuth_deg,predicted_azimuth_deg,error_deg\n");
    for p in preds {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.index, p.class, p.predicted_class, p.azimuth_deg, p.predicted_azimuth_deg, p.error_deg
        ));
    }
    s
}

pub fn parse_predictions_csv(text: &str) -> Result<Vec<ItemPrediction>> {
    let bad = |line: usize| Error::Data(format!("predictions line {line} is malformed"));
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(n + 1));
            }
            let u = |i: usize| f[i].parse::<usize>().map_err(|_| bad(n + 1));
            let r = |i: usize| f[i].parse::<f64>().map_err(|_| bad(n + 1));
            Ok(ItemPrediction {
                index: u(0)?,
                class: u(1)?,
                predicted_class: u(2)?,
                azimuth_deg: r(3)?,
                predicted_azimuth_deg: r(4)?,
                error_deg: r(5)?,
            })
        })
        .collect()
}
