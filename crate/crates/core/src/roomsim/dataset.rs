//! Rendering of labeled scene corpora to disk, with a JSON-lines manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::render_scene_with;
use super::{sample_scene_in, synth_source, ArrayGeometry, SceneRanges};
use crate::audio::{load_wav, peak_normalize, resample, save_wav, MultiChannelWaveform, WORKING_RATE};
use crate::error::{Error, Result};
use crate::roomsim::ism::IsmOptions;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Pretrain,
    Train,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Pretrain => "pretrain",
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn code(self) -> u64 {
        match self {
            Split::Pretrain => 1,
            Split::Train => 2,
            Split::Test => 3,
        }
    }

    /// Seed of scene `index`. Each split owns the seeds whose top byte is its code,
    /// so splits never share a scene.
    pub fn scene_seed(self, master: u64, index: usize) -> u64 {
        (self.code() << 56) | ((master & 0xFFFF_FFFF) << 24) | (index as u64 & 0xFF_FFFF)
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Split::Pretrain),
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

/// Where mono source clips come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceProvider {
    Synthetic { n_classes: usize },
    /// WAV files under `<dir>/<class name>/`; classes are numbered in sorted name order.
    WavDirectory(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomRecord {
    pub w: f64,
    pub l: f64,
    pub h: f64,
    pub rt60: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub class: usize,
    pub azimuth_deg: f64,
    pub room: RoomRecord,
    pub seed: u64,
}

/// Manifest rows plus the directory their relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn path_of(&self, index: usize) -> PathBuf {
        self.root.join(&self.rows[index].path)
    }

    pub fn load_waveform(&self, index: usize) -> Result<MultiChannelWaveform> {
        load_wav(self.path_of(index))
    }

    /// Duration of item `index` in seconds, read from the WAV header.
    pub fn duration_secs(&self, index: usize) -> Result<f64> {
        let path = self.path_of(index);
        let reader = hound::WavReader::open(&path).map_err(|e| Error::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        Ok(reader.duration() as f64 / reader.spec().sample_rate as f64)
    }

    pub fn select(&self, indices: &[usize]) -> Manifest {
        Manifest {
            root: self.root.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.rows.iter().map(|r| r.class + 1).max().unwrap_or(0)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for row in &self.rows {
            text.push_str(&serde_json::to_string(row).map_err(|e| Error::Data(e.to_string()))?);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads a JSON-lines manifest; paths resolve relative to the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<ManifestRow>>>()?;
    Ok(Manifest {
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub clip_seconds: f64,
    /// Fraction of scenes whose source is cut to a random 0.3-1.0 s length.
    pub short_clip_fraction: f64,
    pub ranges: SceneRanges,
    pub geometry: ArrayGeometry,
    pub ism: IsmOptions,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            clip_seconds: 3.0,
            short_clip_fraction: 0.0,
            ranges: SceneRanges::default(),
            geometry: ArrayGeometry::default(),
            ism: IsmOptions::default(),
        }
    }
}

struct WavPool {
    files: Vec<(PathBuf, usize)>,
}

impl WavPool {
    fn scan(dir: &Path) -> Result<Self> {
        let mut classes: Vec<String> = Vec::new();
        let mut files = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        for class_dir in entries {
            let mut wavs: Vec<PathBuf> = std::fs::read_dir(&class_dir)
                .map_err(|e| Error::io(&class_dir, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            if wavs.is_empty() {
                continue;
            }
            wavs.sort();
            let label = classes.len();
            classes.push(class_dir.display().to_string());
            files.extend(wavs.into_iter().map(|p| (p, label)));
        }
        if files.is_empty() {
            return Err(Error::Data(format!(
                "no <class>/*.wav files under {}",
                dir.display()
            )));
        }
        Ok(Self { files })
    }
}

fn fit_length(mut samples: Vec<f64>, n: usize) -> Vec<f64> {
    samples.resize(n, 0.0);
    samples
}

/// Simulates `n_scenes` labeled scenes and writes `<split>.jsonl` plus one WAV per scene
/// under `out_dir/<split>/`. Returns the manifest path.
pub fn build_dataset(
    n_scenes: usize,
    split: Split,
    provider: &SourceProvider,
    rng: &RngStream,
    out_dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    build_dataset_with(n_scenes, split, provider, rng, out_dir, &DatasetOptions::default())
}

pub fn build_dataset_with(
    n_scenes: usize,
    split: Split,
    provider: &SourceProvider,
    rng: &RngStream,
    out_dir: impl AsRef<Path>,
    opts: &DatasetOptions,
) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    let wav_dir = out_dir.join(split.tag());
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let pool = match provider {
        SourceProvider::Synthetic { n_classes } => {
            if *n_classes == 0 || *n_classes > super::MAX_CLASSES {
                return Err(Error::Config(format!(
                    "synthetic class count {n_classes} outside 1..={}",
                    super::MAX_CLASSES
                )));
            }
            None
        }
        SourceProvider::WavDirectory(dir) => Some(WavPool::scan(dir)?),
    };
    let clip_len = (opts.clip_seconds * WORKING_RATE as f64).round() as usize;

    let rows = (0..n_scenes)
        .into_par_iter()
        .map(|i| -> Result<ManifestRow> {
            let seed = split.scene_seed(rng.seed(), i);
            let scene_rng = RngStream::new(seed);
            let scene = sample_scene_in(&opts.ranges, &mut scene_rng.derive(1))?;
            let mut src_rng = scene_rng.derive(2);
            let (class, mut samples) = match (&pool, provider) {
                (Some(pool), _) => {
                    let (path, label) = &pool.files[i % pool.files.len()];
                    let w = resample(&load_wav(path)?, WORKING_RATE);
                    (*label, fit_length(peak_normalize(&MultiChannelWaveform::mono(w.mixdown(), WORKING_RATE)?, 1.0).into_channels().remove(0), clip_len))
                }
                (None, SourceProvider::Synthetic { n_classes }) => {
                    let class = i % n_classes;
                    let w = synth_source(class, opts.clip_seconds, &mut src_rng)?;
                    (class, w.into_channels().remove(0))
                }
                (None, SourceProvider::WavDirectory(_)) => unreachable!(),
            };
            let mut short_rng = scene_rng.derive(3);
            if short_rng.bernoulli(opts.short_clip_fraction) {
                let n = (short_rng.uniform(0.3, 1.0) * WORKING_RATE as f64) as usize;
                samples.truncate(n);
            }
            let source = MultiChannelWaveform::mono(samples, WORKING_RATE)?;
            let rendered = render_scene_with(&scene, &opts.geometry, &source, opts.ism)?;
            let rel = format!("{}/{:06}.wav", split.tag(), i);
            save_wav(&rendered, out_dir.join(&rel))?;
            Ok(ManifestRow {
                path: rel,
                class,
                azimuth_deg: scene.azimuth_deg,
                room: RoomRecord {
                    w: scene.room_dims[0],
                    l: scene.room_dims[1],
                    h: scene.room_dims[2],
                    rt60: scene.rt60,
                },
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        rows,
    };
    let path = out_dir.join(format!("{}.jsonl", split.tag()));
    manifest.write(&path)?;
    Ok(path)
}
