//! Run configuration: a TOML file with `dataset`, `features`, `augment`,
//! `pretrain` and `eval` tables. Every key is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationPlan;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::features::FeatureConfig;
use crate::nn::SgdConfig;
use crate::roomsim::{DatasetOptions, SceneRanges, SourceProvider};
use crate::ssl::{scaled_lr, NtXentConfig, PretrainConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub dataset: DatasetSection,
    pub features: FeatureConfig,
    pub augment: AugmentationPlan,
    pub pretrain: PretrainSection,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_pretrain: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Synthetic source classes, ignored when `source_dir` is set.
    pub n_classes: usize,
    /// Directory of `<class>/*.wav` dry sources used instead of synthetic ones.
    pub source_dir: Option<PathBuf>,
    pub clip_seconds: f64,
    pub short_clip_fraction: f64,
    pub ranges: SceneRanges,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            n_pretrain: 2000,
            n_train: 400,
            n_test: 200,
            n_classes: 8,
            source_dir: None,
            clip_seconds: 3.0,
            short_clip_fraction: 0.0,
            ranges: SceneRanges::default(),
        }
    }
}

impl DatasetSection {
    pub fn provider(&self) -> SourceProvider {
        match &self.source_dir {
            Some(dir) => SourceProvider::WavDirectory(dir.clone()),
            None => SourceProvider::Synthetic { n_classes: self.n_classes },
        }
    }

    pub fn options(&self) -> DatasetOptions {
        DatasetOptions {
            clip_seconds: self.clip_seconds,
            short_clip_fraction: self.short_clip_fraction,
            ranges: self.ranges,
            ..DatasetOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub epochs: usize,
    pub batch_pairs: usize,
    /// Defaults to 0.2 scaled linearly from 512 patches per batch.
    pub base_lr: Option<f64>,
    pub warmup_epochs: usize,
    pub sgd: SgdConfig,
    pub loss: NtXentConfig,
    pub checkpoint_every: usize,
    pub standardize_clips: usize,
}

impl Default for PretrainSection {
    fn default() -> Self {
        let d = PretrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_pairs: d.batch_pairs,
            base_lr: None,
            warmup_epochs: d.warmup_epochs,
            sgd: d.sgd,
            loss: d.loss,
            checkpoint_every: d.checkpoint_every,
            standardize_clips: d.standardize_clips,
        }
    }
}

impl Config {
    /// Reads `path`, applies `key.path=value` overrides, then deserializes.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.augment.validate()?;
        Ok(cfg)
    }

    pub fn pretrain_config(&self, seed: u64) -> PretrainConfig {
        let p = &self.pretrain;
        PretrainConfig {
            epochs: p.epochs,
            batch_pairs: p.batch_pairs,
            base_lr: p.base_lr.unwrap_or_else(|| scaled_lr(p.batch_pairs)),
            warmup_epochs: p.warmup_epochs,
            sgd: p.sgd,
            loss: p.loss,
            plan: self.augment,
            features: self.features,
            seed,
            checkpoint_every: p.checkpoint_every,
            standardize_clips: p.standardize_clips,
            stop_after: None,
            verbose: false,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            features: self.features,
            ..self.eval.clone()
        }
    }
}

/// `pretrain.epochs=5`, `augment.channel_drop=false`, `dataset.source_dir="x"`.
/// Values are parsed as TOML and fall back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(Config::load(None, &[]).unwrap(), Config::default());
    }

    #[test]
    fn default_round_trips_through_toml() {
        let text = toml::to_string(&Config::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        assert_eq!(Config::load(Some(&p), &[]).unwrap(), Config::default());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
        assert_eq!(Config::load(Some(&p), &[]).unwrap(), Config::default());
    }

    #[test]
    fn partial_tables_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[pretrain]\nepochs = 3\n[features.stft]\nhop_size = 80\n").unwrap();
        let c = Config::load(
            Some(&p),
            &["augment.channel_drop=false".into(), "augment.drop_params.drop_probability=0.0".into(), "dataset.source_dir=/tmp/x".into()],
        )
        .unwrap();
        assert_eq!(c.pretrain.epochs, 3);
        assert_eq!(c.features.stft.hop_size, 80);
        assert_eq!(c.features.stft.fft_size, 512);
        assert!(!c.augment.channel_drop);
        assert_eq!(c.dataset.source_dir, Some(PathBuf::from("/tmp/x")));
        let pc = c.pretrain_config(4);
        assert_eq!((pc.seed, pc.epochs, pc.base_lr), (4, 3, scaled_lr(64)));
        assert_eq!(c.eval_config().features.stft.hop_size, 80);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.toml");
        let e = Config::load(Some(&missing), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("nope.toml"));

        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[pretrain]\nepoch = 3\n").unwrap();
        assert_eq!(Config::load(Some(&p), &[]).unwrap_err().exit_code(), 1);
        assert_eq!(Config::load(None, &["pretrain".into()]).unwrap_err().exit_code(), 1);
        assert_eq!(Config::load(None, &["augment.drop_params.drop_probability=2.0".into()]).unwrap_err().exit_code(), 1);
    }
}
