use rayon::prelude::*;

use crate::audio::{crop_pair, resample, MultiChannelWaveform, SourceId, WORKING_RATE};
use crate::augment::{apply_plan, AugmentationPlan, RecordingPool};
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::nn::Standardizer;
use crate::rng::RngStream;
use crate::roomsim::Manifest;

/// `2N` standardized stacks; rows `2m` and `2m + 1` come from the same recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: Vec<f32>,
    pub n_rows: usize,
    pub shape: (usize, usize, usize),
    pub source_ids: Vec<SourceId>,
}

impl Batch {
    pub fn row_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let n = self.row_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> Vec<&[f32]> {
        (0..self.n_rows).map(|i| self.row(i)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

pub(crate) fn load_working(manifest: &Manifest, index: usize) -> Result<MultiChannelWaveform> {
    let w = manifest.load_waveform(index)?;
    Ok(if w.sample_rate() == WORKING_RATE {
        w
    } else {
        resample(&w, WORKING_RATE)
    })
}

/// Builds the batch for the given manifest items. Each item yields one positive
/// pair; Mixup backgrounds come from the other recordings of the same batch.
pub fn assemble_batch_from(
    manifest: &Manifest,
    indices: &[usize],
    plan: &AugmentationPlan,
    extractor: &FeatureExtractor,
    standardizer: &Standardizer,
    rng: &RngStream,
) -> Result<Batch> {
    if indices.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let recordings: Vec<MultiChannelWaveform> =
        indices.par_iter().map(|&i| load_working(manifest, i)).collect::<Result<_>>()?;
    let ids: Vec<SourceId> = indices.iter().map(|&i| SourceId(i as u64)).collect();
    let pool = RecordingPool::new(ids.iter().copied().zip(recordings.iter()).collect());
    let pairs: Vec<(Vec<f32>, Vec<f32>, (usize, usize, usize))> = recordings
        .par_iter()
        .zip(ids.par_iter())
        .enumerate()
        .map(|(m, (w, &id))| {
            let mut r = rng.derive(m as u64);
            let (p, q) = crop_pair(w, id, &mut r);
            let (a, b) = apply_plan((&p, &q), &pool, plan, extractor, &mut r)?;
            Ok((standardizer.apply(&a)?, standardizer.apply(&b)?, a.shape()))
        })
        .collect::<Result<_>>()?;
    let shape = pairs[0].2;
    let mut data = Vec::with_capacity(2 * pairs.len() * shape.0 * shape.1 * shape.2);
    let mut source_ids = Vec::with_capacity(2 * pairs.len());
    for ((a, b, s), id) in pairs.into_iter().zip(ids) {
        if s != shape {
            return Err(Error::Size(format!("stack shape {s:?} differs from {shape:?} within a batch")));
        }
        data.extend(a);
        data.extend(b);
        source_ids.extend([id, id]);
    }
    Ok(Batch {
        data,
        n_rows: source_ids.len(),
        shape,
        source_ids,
    })
}

/// Samples `n_pairs` distinct recordings and builds their batch.
pub fn assemble_batch(
    manifest: &Manifest,
    plan: &AugmentationPlan,
    extractor: &FeatureExtractor,
    standardizer: &Standardizer,
    rng: &mut RngStream,
    n_pairs: usize,
) -> Result<Batch> {
    if n_pairs == 0 || n_pairs > manifest.len() {
        return Err(Error::Config(format!(
            "batch of {n_pairs} pairs from a manifest of {} recordings",
            manifest.len()
        )));
    }
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    rng.shuffle(&mut order);
    order.truncate(n_pairs);
    let batch_rng = rng.fork();
    assemble_batch_from(manifest, &order, plan, extractor, standardizer, &batch_rng)
}
