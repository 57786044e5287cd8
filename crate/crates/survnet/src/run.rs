//! One training run: model construction, the epoch loop and the run
//! directory.
//!
//! A run directory holds `manifest.json`, `metrics.csv`, `metrics.jsonl`
//! and `model.ckpt`. The metric files are rewritten after every epoch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use survnet_core::datagen::SurvivalDataset;
use survnet_core::metrics::MetricReport;
use survnet_core::nn::{Model, ModelConfig, Real};
use survnet_core::train::{evaluate_predictions, predict_all, EpochMetrics, Trainer};

use crate::checkpoint;
use crate::config::{Precision, TrainSettings};
use crate::error::{Error, Result};
use crate::history;
use crate::manifest::Manifest;

pub struct RunRequest<'a> {
    pub command: &'a str,
    pub settings: &'a TrainSettings,
    pub train: &'a SurvivalDataset,
    pub test: &'a SurvivalDataset,
    pub data_path: Option<&'a Path>,
    pub out: Option<&'a Path>,
    /// Fill the `seconds` column. Off keeps metric files reproducible.
    pub timing: bool,
}

pub fn model_config(settings: &TrainSettings, data: &SurvivalDataset) -> Result<ModelConfig> {
    Ok(ModelConfig::preset(settings.preset, &data.images.shape())?)
}

/// Trains, calling `on_epoch` after each epoch, and returns the history.
pub fn train(req: &RunRequest<'_>, on_epoch: &mut dyn FnMut(&EpochMetrics)) -> Result<Vec<EpochMetrics>> {
    match req.settings.precision {
        Precision::F32 => train_typed::<f32>(req, on_epoch),
        Precision::F64 => train_typed::<f64>(req, on_epoch),
    }
}

fn train_typed<T: Real>(req: &RunRequest<'_>, on_epoch: &mut dyn FnMut(&EpochMetrics)) -> Result<Vec<EpochMetrics>> {
    let cfg = model_config(req.settings, req.train)?;
    let model = Model::<T>::new(cfg.clone(), req.settings.train.seed)?;
    let files = match req.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
            let m = Manifest::new(
                req.command,
                req.data_path,
                req.train,
                req.test,
                &cfg,
                model.num_params(),
                req.settings,
            );
            m.save(&dir.join("manifest.json"))?;
            Some(RunFiles::new(dir))
        }
        None => None,
    };
    let mut trainer = Trainer::new(model, req.settings.train.clone(), req.train, req.test)?;
    let mut history = Vec::with_capacity(req.settings.train.epochs);
    while trainer.epochs_done() < req.settings.train.epochs {
        let start = Instant::now();
        let mut m = trainer.step()?;
        if req.timing {
            m.seconds = Some(start.elapsed().as_secs_f64());
        }
        history.push(m);
        if let Some(f) = &files {
            f.write_history(&history)?;
        }
        on_epoch(&m);
    }
    if let Some(f) = &files {
        checkpoint::save(&f.checkpoint, &trainer.model.export())?;
    }
    Ok(history)
}

struct RunFiles {
    csv: PathBuf,
    jsonl: PathBuf,
    checkpoint: PathBuf,
}

impl RunFiles {
    fn new(dir: &Path) -> Self {
        Self {
            csv: dir.join("metrics.csv"),
            jsonl: dir.join("metrics.jsonl"),
            checkpoint: dir.join("model.ckpt"),
        }
    }

    fn write_history(&self, h: &[EpochMetrics]) -> Result<()> {
        fs::write(&self.csv, history::to_csv(h)).map_err(Error::io(&self.csv))?;
        fs::write(&self.jsonl, history::to_jsonl(h)).map_err(Error::io(&self.jsonl))
    }
}

/// Test loss and metrics of a checkpoint on a dataset.
pub fn evaluate(
    settings: &TrainSettings,
    tensors: &checkpoint::Tensors,
    test: &SurvivalDataset,
) -> Result<(f64, MetricReport)> {
    match settings.precision {
        Precision::F32 => evaluate_typed::<f32>(settings, tensors, test),
        Precision::F64 => evaluate_typed::<f64>(settings, tensors, test),
    }
}

fn evaluate_typed<T: Real>(
    settings: &TrainSettings,
    tensors: &checkpoint::Tensors,
    test: &SurvivalDataset,
) -> Result<(f64, MetricReport)> {
    test.validate()?;
    let mut model = Model::<T>::new(model_config(settings, test)?, settings.train.seed)?;
    model.import(tensors)?;
    let f = predict_all(&mut model, test, settings.train.chunk)?;
    let (test_loss, report) = evaluate_predictions(&f, &test.records, &settings.train)?;
    if !test_loss.is_finite() {
        return Err(Error::Numeric("non-finite test loss".into()));
    }
    Ok((test_loss, report))
}
