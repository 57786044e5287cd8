//! Flat `key = value` configuration files and the settings they fill.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Unknown keys are rejected. Command-line flags are applied after the
//! file, so they win.
//!
//! Data generation keys: `preset`, `seed`, `train`, `test`, `scale`,
//! `phi0`, `phi1`, `mnist_dir`, `cifar_dir`, `nodule.dots`,
//! `nodule.patches`, `nodule.alpha`, `nodule.prevalence`,
//! `nodule.cancer_event_rate`, and the inclusive ranges `nodule.dot_side`,
//! `nodule.censored_patch_side`, `nodule.event_patch_side` written `lo..=hi`.
//!
//! Training keys: `preset`, `loss`, `batch_size`, `epochs`, `lr`,
//! `lr_decay_at`, `lr_decay`, `seed`, `bce_weight`, `shuffle`, `chunk`,
//! `subgroup`, `precision`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use survnet_core::datagen::{CensorMode, GenConfig, NoduleParams};
use survnet_core::nn::Preset;
use survnet_core::train::{LossKind, Subgroup, TrainConfig};

use crate::error::{Error, Result};

/// Parses the file format into ordered `(key, value)` pairs.
pub fn parse(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.iter().any(|(e, _)| e == k) {
            return Err(format!("line {}: duplicate key {k:?}", i + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: {e}")))
}

fn range(key: &str, v: &str) -> Result<(u32, u32)> {
    let (lo, hi) = v
        .split_once("..=")
        .ok_or_else(|| Error::Config(format!("{key}: expected lo..=hi, got {v:?}")))?;
    Ok((value(key, lo.trim())?, value(key, hi.trim())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataPreset {
    SimA,
    SimB,
    NoduleCifar,
}

impl DataPreset {
    pub fn name(self) -> &'static str {
        match self {
            DataPreset::SimA => "sim-a",
            DataPreset::SimB => "sim-b",
            DataPreset::NoduleCifar => "nodule-cifar",
        }
    }

    pub fn censor_mode(self) -> CensorMode {
        match self {
            DataPreset::SimA => CensorMode::None,
            DataPreset::SimB => CensorMode::MedianHalf,
            DataPreset::NoduleCifar => CensorMode::Nodule,
        }
    }
}

impl fmt::Display for DataPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataPreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sim-a" => Ok(DataPreset::SimA),
            "sim-b" => Ok(DataPreset::SimB),
            "nodule-cifar" => Ok(DataPreset::NoduleCifar),
            other => Err(format!("unknown data preset {other:?} (sim-a, sim-b, nodule-cifar)")),
        }
    }
}

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSettings {
    pub preset: DataPreset,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    /// Multiplies the training-set size only.
    pub scale: f64,
    pub phi: [f64; 2],
    pub mnist_dir: Option<PathBuf>,
    pub cifar_dir: Option<PathBuf>,
    pub nodule: NoduleParams,
}

/// Log hazards of the two digit classes. See the README for why the gap is 3.
pub const DEFAULT_PHI: [f64; 2] = [0.0, 3.0];

impl GenSettings {
    pub fn new(preset: DataPreset) -> Self {
        let (train, test) = match preset {
            DataPreset::SimA | DataPreset::SimB => (2000, 1000),
            DataPreset::NoduleCifar => (10000, 1000),
        };
        Self {
            preset,
            seed: 1,
            train,
            test,
            scale: 1.0,
            phi: DEFAULT_PHI,
            mnist_dir: None,
            cifar_dir: None,
            nodule: NoduleParams::default(),
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let n = &mut self.nodule;
        match key {
            "preset" => self.preset = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            "train" => self.train = value(key, v)?,
            "test" => self.test = value(key, v)?,
            "scale" => self.scale = value(key, v)?,
            "phi0" => self.phi[0] = value(key, v)?,
            "phi1" => self.phi[1] = value(key, v)?,
            "mnist_dir" => self.mnist_dir = Some(v.into()),
            "cifar_dir" => self.cifar_dir = Some(v.into()),
            "nodule.dots" => n.dots = value(key, v)?,
            "nodule.patches" => n.patches = value(key, v)?,
            "nodule.alpha" => n.alpha = value(key, v)?,
            "nodule.prevalence" => n.prevalence = value(key, v)?,
            "nodule.cancer_event_rate" => n.cancer_event_rate = value(key, v)?,
            "nodule.dot_side" => n.dot_side = range(key, v)?,
            "nodule.censored_patch_side" => n.censored_patch_side = range(key, v)?,
            "nodule.event_patch_side" => n.event_patch_side = range(key, v)?,
            _ => return Err(Error::Config(format!("unknown data setting {key:?}"))),
        }
        Ok(())
    }

    /// The preset (an explicit one, else the file's, else `sim-a`) is
    /// applied first so the other keys refine it.
    pub fn from_pairs(preset: Option<DataPreset>, pairs: &[(String, String)]) -> Result<Self> {
        let preset = match (preset, pairs.iter().find(|(k, _)| k == "preset")) {
            (Some(p), _) => p,
            (None, Some((k, v))) => value(k, v)?,
            (None, None) => DataPreset::SimA,
        };
        let mut s = Self::new(preset);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn scaled_train(&self) -> usize {
        ((self.train as f64 * self.scale).round() as usize).max(2)
    }

    pub fn gen_config(&self) -> Result<GenConfig> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {}", self.scale)));
        }
        let cfg = GenConfig {
            seed: self.seed,
            phi_map: vec![(0, self.phi[0]), (1, self.phi[1])],
            censor_mode: self.preset.censor_mode(),
            train: self.scaled_train(),
            test: self.test,
            nodule: self.nodule.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision {other:?} (f32, f64)")),
        }
    }
}

/// Everything that determines a training run on a fixed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub preset: Preset,
    pub precision: Precision,
    pub train: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            preset: Preset::Table1,
            precision: Precision::F32,
            train: TrainConfig::default(),
        }
    }
}

impl TrainSettings {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "preset" => self.preset = value(key, v)?,
            "precision" => self.precision = value(key, v)?,
            "loss" => t.loss = value(key, v)?,
            "batch_size" => t.batch_size = value(key, v)?,
            "epochs" => t.epochs = value(key, v)?,
            "lr" => t.lr = value(key, v)?,
            "lr_decay_at" => t.lr_decay_at = value(key, v)?,
            "lr_decay" => t.lr_decay = value(key, v)?,
            "seed" => t.seed = value(key, v)?,
            "bce_weight" => t.bce_weight = value(key, v)?,
            "shuffle" => t.shuffle = value(key, v)?,
            "chunk" => t.chunk = value(key, v)?,
            "subgroup" => t.subgroup = value(key, v)?,
            _ => return Err(Error::Config(format!("unknown training setting {key:?}"))),
        }
        Ok(())
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut s = Self::default();
        for (k, v) in pairs {
            s.set(k, v)?;
        }
        Ok(s)
    }

    /// The subgroup a loss kind defaults to when none is configured.
    pub fn default_subgroup(loss: LossKind) -> Subgroup {
        if loss.two_task() {
            Subgroup::Diseased
        } else {
            Subgroup::Events
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_comments_and_rejects_junk() {
        let p = parse("# top\nlr = 0.05  # trailing\n\nepochs=3\n").unwrap();
        assert_eq!(p, vec![("lr".into(), "0.05".into()), ("epochs".into(), "3".into())]);
        assert!(parse("lr 0.05").unwrap_err().starts_with("line 1"));
        assert!(parse("a = 1\na = 2").unwrap_err().contains("duplicate"));
    }

    #[test]
    fn train_settings_apply_and_reject_unknown() {
        let mut s = TrainSettings::from_pairs(&parse("loss = oracle\nlr = 0.5\nsubgroup = diseased").unwrap()).unwrap();
        assert_eq!(s.train.loss, LossKind::Oracle);
        assert_eq!(s.train.lr, 0.5);
        assert_eq!(s.train.subgroup, Subgroup::Diseased);
        assert!(matches!(s.set("momentum", "0.9"), Err(Error::Config(_))));
        assert!(matches!(s.set("epochs", "many"), Err(Error::Config(_))));
    }

    #[test]
    fn gen_settings_preset_first_then_overrides() {
        let pairs = parse("test = 10\npreset = nodule-cifar\nnodule.event_patch_side = 6..=9").unwrap();
        let s = GenSettings::from_pairs(None, &pairs).unwrap();
        assert_eq!((s.preset, s.train, s.test), (DataPreset::NoduleCifar, 10000, 10));
        assert_eq!(s.nodule.event_patch_side, (6, 9));
        let mut s = GenSettings::new(DataPreset::NoduleCifar);
        s.scale = 0.4;
        assert_eq!(s.gen_config().unwrap().train, 4000);
        assert_eq!(s.gen_config().unwrap().test, 1000);
    }
}
