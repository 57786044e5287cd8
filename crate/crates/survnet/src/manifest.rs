//! Run manifest: every setting in effect for a training run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survnet_core::datagen::SurvivalDataset;
use survnet_core::nn::ModelConfig;

use crate::config::TrainSettings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSection {
    /// Dataset directory, or `None` when generated in memory.
    pub path: Option<String>,
    pub generator: String,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Generator parameters of the training split.
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub preset: String,
    pub input: Vec<usize>,
    pub layers: Vec<String>,
    pub init: String,
    pub precision: String,
    pub num_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub loss: String,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay_at: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub bce_weight: f64,
    pub shuffle: bool,
    pub chunk: usize,
    pub subgroup: String,
    pub eval_every: usize,
}

impl Manifest {
    pub fn new(
        command: &str,
        data_path: Option<&Path>,
        train: &SurvivalDataset,
        test: &SurvivalDataset,
        model: &ModelConfig,
        num_params: usize,
        s: &TrainSettings,
    ) -> Self {
        let t = &s.train;
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            data: DataSection {
                path: data_path.map(|p| p.display().to_string()),
                generator: train.provenance.generator.clone(),
                seed: train.provenance.seed,
                train_size: train.len(),
                test_size: test.len(),
                params: train.provenance.params.clone(),
            },
            model: ModelSection {
                preset: model.preset.name().into(),
                input: model.input.clone(),
                layers: model.layers.iter().map(|l| format!("{l:?}")).collect(),
                init: model.init.into(),
                precision: s.precision.name().into(),
                num_params,
            },
            train: TrainSection {
                loss: t.loss.name().into(),
                batch_size: t.batch_size,
                epochs: t.epochs,
                lr: t.lr,
                lr_decay_at: t.lr_decay_at,
                lr_decay: t.lr_decay,
                seed: t.seed,
                bce_weight: t.bce_weight,
                shuffle: t.shuffle,
                chunk: t.chunk,
                subgroup: t.subgroup.name().into(),
                eval_every: 1,
            },
        }
    }

    /// The training settings this manifest records.
    pub fn train_settings(&self) -> Result<TrainSettings> {
        let t = &self.train;
        let pairs: Vec<(String, String)> = [
            ("preset", self.model.preset.clone()),
            ("precision", self.model.precision.clone()),
            ("loss", t.loss.clone()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("lr", t.lr.to_string()),
            ("lr_decay_at", t.lr_decay_at.to_string()),
            ("lr_decay", t.lr_decay.to_string()),
            ("seed", t.seed.to_string()),
            ("bce_weight", t.bce_weight.to_string()),
            ("shuffle", t.shuffle.to_string()),
            ("chunk", t.chunk.to_string()),
            ("subgroup", t.subgroup.clone()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        TrainSettings::from_pairs(&pairs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

/// Keys every manifest must carry, as JSON pointers.
pub const REQUIRED_KEYS: &[&str] = &[
    "/version",
    "/command",
    "/data/generator",
    "/data/seed",
    "/data/train_size",
    "/data/test_size",
    "/data/params",
    "/model/preset",
    "/model/input",
    "/model/layers",
    "/model/init",
    "/model/precision",
    "/model/num_params",
    "/train/loss",
    "/train/batch_size",
    "/train/epochs",
    "/train/lr",
    "/train/lr_decay_at",
    "/train/lr_decay",
    "/train/seed",
    "/train/bce_weight",
    "/train/shuffle",
    "/train/chunk",
    "/train/subgroup",
    "/train/eval_every",
];

/// Checks a manifest document for missing or null required keys.
pub fn validate_json(doc: &serde_json::Value) -> std::result::Result<(), String> {
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| doc.pointer(k).map_or(true, serde_json::Value::is_null))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(format!("manifest lacks {}", missing.join(", ")))
    }
}
