use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::roomsim::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SubsetAmount {
    Fraction(f64),
    Hours(f64),
}

pub fn total_hours(manifest: &Manifest) -> Result<f64> {
    Ok((0..manifest.len()).map(|i| manifest.duration_secs(i)).sum::<Result<f64>>()? / 3600.0)
}

/// Class-stratified random subset with the requested labeled duration.
///
/// Each class is shuffled and every clip gets the key `(duration before it + half its
/// own) / class duration`; merging by key and cutting the prefix nearest to the target
/// keeps every prefix close to the class proportions of the full set.
pub fn subset_select(manifest: &Manifest, amount: SubsetAmount, rng: &RngStream) -> Result<Manifest> {
    let durations: Vec<f64> = (0..manifest.len()).map(|i| manifest.duration_secs(i)).collect::<Result<_>>()?;
    let total: f64 = durations.iter().sum();
    let target = match amount {
        SubsetAmount::Fraction(f) if (0.0..=1.0).contains(&f) => f * total,
        SubsetAmount::Hours(h) if h >= 0.0 => h * 3600.0,
        other => return Err(Error::Config(format!("invalid subset amount {other:?}"))),
    };
    if target > total * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "requested {:.4} h of labels, only {:.4} h available",
            target / 3600.0,
            total / 3600.0
        )));
    }
    if target >= total {
        return Ok(manifest.clone());
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(manifest.len());
    for class in 0..manifest.n_classes() {
        let mut items: Vec<usize> = (0..manifest.len()).filter(|&i| manifest.rows[i].class == class).collect();
        rng.derive(class as u64).shuffle(&mut items);
        let class_total: f64 = items.iter().map(|&i| durations[i]).sum();
        let mut acc = 0.0;
        for i in items {
            keyed.push(((acc + 0.5 * durations[i]) / class_total, class, i));
            acc += durations[i];
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut acc, mut take) = (0.0, 0);
    for (_, _, i) in &keyed {
        if (acc + durations[*i] - target).abs() > (acc - target).abs() {
            break;
        }
        acc += durations[*i];
        take += 1;
    }
    let mut chosen: Vec<usize> = keyed[..take].iter().map(|k| k.2).collect();
    chosen.sort_unstable();
    Ok(manifest.select(&chosen))
}

/// Splits item indices into (train, validation), holding out `fraction` of them.
pub fn validation_split(n: usize, fraction: f64, rng: &RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    rng.derive_named("validation", 0).shuffle(&mut order);
    let n_val = if n >= 2 { ((n as f64 * fraction).round() as usize).min(n - 1) } else { 0 };
    let mut val = order.split_off(n - n_val);
    order.sort_unstable();
    val.sort_unstable();
    (order, val)
}
