//! The three simulation recipes and their summary tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use survnet_core::nn::Preset;
use survnet_core::train::{EpochMetrics, LossKind, Subgroup};

use crate::config::{DataPreset, GenSettings, Precision, TrainSettings};
use crate::error::{Error, Result};
use crate::generate::generate;
use crate::run::{train, RunRequest};

/// Epochs averaged for a stabilized metric.
pub const STABLE_WINDOW: usize = 5;
/// A metric has stabilized once it stays within this distance of its
/// stabilized value.
pub const STABLE_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sim {
    A,
    B,
    C,
}

impl FromStr for Sim {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Sim::A),
            "b" => Ok(Sim::B),
            "c" => Ok(Sim::C),
            other => Err(format!("unknown simulation {other:?} (a, b, c)")),
        }
    }
}

impl Sim {
    pub fn name(self) -> &'static str {
        match self {
            Sim::A => "a",
            Sim::B => "b",
            Sim::C => "c",
        }
    }

    pub fn data_preset(self) -> DataPreset {
        match self {
            Sim::A => DataPreset::SimA,
            Sim::B => DataPreset::SimB,
            Sim::C => DataPreset::NoduleCifar,
        }
    }

    pub fn losses(self) -> &'static [LossKind] {
        match self {
            Sim::A | Sim::B => &[LossKind::Oracle, LossKind::FullBatched, LossKind::MiniBatched],
            Sim::C => &[LossKind::TwoTaskFull, LossKind::TwoTaskMini],
        }
    }

    /// Training settings for one loss of this simulation.
    pub fn settings(self, loss: LossKind, seed: u64) -> TrainSettings {
        let mut s = TrainSettings {
            precision: Precision::F32,
            ..TrainSettings::default()
        };
        s.train.loss = loss;
        s.train.seed = seed;
        match self {
            Sim::A | Sim::B => {
                s.preset = Preset::Table1;
                s.train.epochs = 50;
                s.train.subgroup = Subgroup::Events;
            }
            Sim::C => {
                s.preset = Preset::SimC;
                s.train.epochs = 30;
                s.train.subgroup = Subgroup::Diseased;
            }
        }
        s
    }

    /// Published values as `(metric, [per-loss values in `losses()` order])`.
    pub fn published(self) -> &'static [(&'static str, &'static [f64])] {
        match self {
            Sim::A => &[("c-index", &[0.7268, 0.7165, 0.7189])],
            Sim::B => &[("c1", &[0.7184, 0.7146, 0.7166]), ("c2", &[0.6845, 0.6770, 0.6790])],
            Sim::C => &[
                ("auc", &[0.770, 0.783]),
                ("c1", &[0.661, 0.677]),
                ("c2", &[0.779, 0.785]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub sim: Sim,
    pub seed: u64,
    pub scale: f64,
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
    pub mnist_dir: Option<PathBuf>,
    pub cifar_dir: Option<PathBuf>,
    pub timing: bool,
}

impl ReproduceOptions {
    pub fn new(sim: Sim) -> Self {
        Self {
            sim,
            seed: 1,
            scale: 1.0,
            epochs: None,
            out: None,
            mnist_dir: None,
            cifar_dir: None,
            timing: false,
        }
    }

    pub fn gen_settings(&self) -> GenSettings {
        let mut g = GenSettings::new(self.sim.data_preset());
        g.seed = self.seed;
        g.scale = self.scale;
        g.mnist_dir = self.mnist_dir.clone();
        g.cifar_dir = self.cifar_dir.clone();
        g
    }
}

/// Mean of the last [`STABLE_WINDOW`] epochs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stabilized {
    pub test_loss: f64,
    pub auc: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

fn tail_mean(h: &[EpochMetrics], pick: impl Fn(&EpochMetrics) -> Option<f64>) -> Option<f64> {
    let tail = &h[h.len().saturating_sub(STABLE_WINDOW)..];
    let v: Option<Vec<f64>> = tail.iter().map(pick).collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn stabilized(h: &[EpochMetrics]) -> Stabilized {
    Stabilized {
        test_loss: tail_mean(h, |m| Some(m.test_loss)).unwrap_or(f64::NAN),
        auc: tail_mean(h, |m| m.auc),
        c1: tail_mean(h, |m| m.c1),
        c2: tail_mean(h, |m| m.c2),
    }
}

/// First epoch (1-based) after which the metric never leaves
/// [`STABLE_BAND`] of its stabilized value.
pub fn epochs_to_stabilize(h: &[EpochMetrics], pick: impl Fn(&EpochMetrics) -> Option<f64>) -> Option<usize> {
    let target = tail_mean(h, &pick)?;
    let values: Option<Vec<f64>> = h.iter().map(&pick).collect();
    let values = values?;
    let last_out = values.iter().rposition(|v| (v - target).abs() > STABLE_BAND);
    Some(match last_out {
        Some(i) => h[(i + 1).min(h.len() - 1)].epoch,
        None => h[0].epoch,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRun {
    pub loss: LossKind,
    pub history: Vec<EpochMetrics>,
    pub stabilized: Stabilized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub sim: Sim,
    pub source: String,
    pub runs: Vec<LossRun>,
}

/// Generates the data and trains every loss of the recipe in turn.
/// `progress` receives human-readable lines.
pub fn reproduce(opts: &ReproduceOptions, progress: &mut dyn FnMut(&str)) -> Result<Reproduction> {
    let data = generate(&opts.gen_settings())?;
    progress(&format!(
        "simulation {}: {} train / {} test records, images from {}",
        opts.sim.name().to_uppercase(),
        data.train.len(),
        data.test.len(),
        data.source
    ));
    let mut runs = Vec::new();
    for &loss in opts.sim.losses() {
        let mut settings = opts.sim.settings(loss, opts.seed);
        if let Some(e) = opts.epochs {
            settings.train.epochs = e;
        }
        let out = opts.out.as_deref().map(|d| d.join(loss.name()));
        let command = format!(
            "reproduce {} --seed {} --scale {}",
            opts.sim.name(),
            opts.seed,
            opts.scale
        );
        let req = RunRequest {
            command: &command,
            settings: &settings,
            train: &data.train,
            test: &data.test,
            data_path: None,
            out: out.as_deref(),
            timing: opts.timing,
        };
        let history = train(&req, &mut |m| {
            progress(&format!("{:<13} {}", loss.name(), status_line(m)))
        })
        .map_err(|e| with_context(e, loss))?;
        let stabilized = stabilized(&history);
        runs.push(LossRun {
            loss,
            history,
            stabilized,
        });
    }
    Ok(Reproduction {
        sim: opts.sim,
        source: data.source,
        runs,
    })
}

fn with_context(e: Error, loss: LossKind) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{loss}: {m}")),
        Error::Config(m) => Error::Config(format!("{loss}: {m}")),
        other => other,
    }
}

fn opt4(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

/// Human-readable epoch status.
pub fn status_line(m: &EpochMetrics) -> String {
    let mut s = format!(
        "epoch {:>3}  train_loss {:.5}  test_loss {:.5}  auc {}  c1 {}  c2 {}",
        m.epoch,
        m.train_loss,
        m.test_loss,
        opt4(m.auc),
        opt4(m.c1),
        opt4(m.c2)
    );
    if m.skipped_batches > 0 {
        let _ = write!(s, "  skipped {}", m.skipped_batches);
    }
    if let Some(t) = m.seconds {
        let _ = write!(s, "  {t:.1}s");
    }
    s
}

fn metric(run: &LossRun, name: &str) -> Option<f64> {
    let s = &run.stabilized;
    match name {
        "auc" => s.auc,
        "c1" | "c-index" => s.c1,
        "c2" => s.c2,
        _ => None,
    }
}

/// Tab-separated summary: one row per metric, and for every loss its
/// stabilized value followed by the published value.
pub fn summary_table(r: &Reproduction) -> String {
    let mut out = String::from("metric");
    for run in &r.runs {
        let _ = write!(out, "\t{0}\t{0}_published", run.loss.name());
    }
    out.push('\n');
    for (name, published) in r.sim.published() {
        out.push_str(name);
        for (run, p) in r.runs.iter().zip(published.iter()) {
            let _ = write!(out, "\t{}\t{p:.4}", opt4(metric(run, name)));
        }
        out.push('\n');
    }
    out.push_str("test_loss");
    for run in &r.runs {
        let _ = write!(out, "\t{:.4}\t-", run.stabilized.test_loss);
    }
    out.push('\n');
    if r.sim == Sim::C {
        out.push_str("epochs_to_stable_auc");
        for run in &r.runs {
            let e = epochs_to_stabilize(&run.history, |m| m.auc);
            let _ = write!(out, "\t{}\t-", e.map(|e| e.to_string()).unwrap_or_else(|| "-".into()));
        }
        out.push('\n');
    }
    out
}

/// Directory of one loss's run inside a reproduction output directory.
pub fn run_dir(out: &Path, loss: LossKind) -> PathBuf {
    out.join(loss.name())
}
