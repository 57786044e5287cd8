//! Batching, SGD epochs and evaluation.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{stream, Split, SurvivalDataset};
use crate::error::{NnError, TrainError};
use crate::metrics::MetricReport;
use crate::nn::{Model, Real};
use crate::survival::{Objective, RiskScope, SurvivalRecord};

const BATCH_PURPOSE: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Known-baseline likelihood on mini-batches.
    Oracle,
    /// Cox partial likelihood over the whole training set; one step per epoch.
    FullBatched,
    /// Cox partial likelihood with risk sets restricted to each mini-batch.
    MiniBatched,
    /// BCE plus the full-batched Cox term; one step per epoch.
    TwoTaskFull,
    /// BCE plus the mini-batched Cox term.
    TwoTaskMini,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Oracle,
        LossKind::FullBatched,
        LossKind::MiniBatched,
        LossKind::TwoTaskFull,
        LossKind::TwoTaskMini,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Oracle => "oracle",
            LossKind::FullBatched => "full-batched",
            LossKind::MiniBatched => "mini-batched",
            LossKind::TwoTaskFull => "two-task-full",
            LossKind::TwoTaskMini => "two-task-mini",
        }
    }

    /// Whether each epoch is a single step on the full training set.
    pub fn full_batch(self) -> bool {
        matches!(self, LossKind::FullBatched | LossKind::TwoTaskFull)
    }

    pub fn two_task(self) -> bool {
        matches!(self, LossKind::TwoTaskFull | LossKind::TwoTaskMini)
    }

    /// The objective optimized during training.
    pub fn train_objective(self, bce_weight: f64) -> Objective {
        match self {
            LossKind::Oracle => Objective::Oracle,
            LossKind::FullBatched => Objective::Cox(RiskScope::Full),
            LossKind::MiniBatched => Objective::Cox(RiskScope::Batch),
            LossKind::TwoTaskFull => Objective::TwoTask {
                scope: RiskScope::Full,
                bce_weight,
            },
            LossKind::TwoTaskMini => Objective::TwoTask {
                scope: RiskScope::Batch,
                bce_weight,
            },
        }
    }

    /// The objective reported as test loss: batched kinds use the full-set
    /// risk sets so curves of both kinds are comparable.
    pub fn eval_objective(self, bce_weight: f64) -> Objective {
        match self {
            LossKind::Oracle => Objective::Oracle,
            LossKind::FullBatched | LossKind::MiniBatched => Objective::Cox(RiskScope::Full),
            LossKind::TwoTaskFull | LossKind::TwoTaskMini => Objective::TwoTask {
                scope: RiskScope::Full,
                bce_weight,
            },
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-task" => Ok(LossKind::TwoTaskMini),
            _ => LossKind::ALL
                .into_iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| TrainError::Config(format!("unknown loss kind {s:?}"))),
        }
    }
}

/// Which test records the second concordance index covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subgroup {
    /// Observed events only.
    Events,
    /// Records with `label = 1`.
    Diseased,
}

impl Subgroup {
    pub fn name(self) -> &'static str {
        match self {
            Subgroup::Events => "events",
            Subgroup::Diseased => "diseased",
        }
    }

    pub fn mask(self, records: &[SurvivalRecord]) -> Vec<bool> {
        records
            .iter()
            .map(|r| match self {
                Subgroup::Events => r.event,
                Subgroup::Diseased => r.label,
            })
            .collect()
    }
}

impl FromStr for Subgroup {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "events" => Ok(Subgroup::Events),
            "diseased" => Ok(Subgroup::Diseased),
            other => Err(TrainError::Config(format!("unknown subgroup {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Fraction of the epochs after which the rate is multiplied by `lr_decay`.
    pub lr_decay_at: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub bce_weight: f64,
    /// Reshuffle batches every epoch; off means identity partitioning.
    pub shuffle: bool,
    /// Samples per forward pass when evaluating or full-batch training.
    pub chunk: usize,
    pub subgroup: Subgroup,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::MiniBatched,
            batch_size: 64,
            epochs: 50,
            lr: 0.01,
            lr_decay_at: 0.75,
            lr_decay: 0.1,
            seed: 1,
            bce_weight: 1.0,
            shuffle: true,
            chunk: 64,
            subgroup: Subgroup::Events,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        if self.batch_size < 2 && !self.loss.full_batch() && self.loss != LossKind::Oracle {
            return bad("mini-batched Cox losses need a batch size of at least 2");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.lr_decay_at) || !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad("lr decay point must lie in [0, 1] and the factor must be positive");
        }
        if !(self.bce_weight >= 0.0 && self.bce_weight.is_finite()) {
            return bad("bce weight must be nonnegative");
        }
        if self.chunk == 0 {
            return bad("chunk must be positive");
        }
        Ok(())
    }

    /// Step size for a 0-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decay_epoch = (self.lr_decay_at * self.epochs as f64).floor() as usize;
        if epoch >= decay_epoch && self.lr_decay_at < 1.0 {
            self.lr * self.lr_decay
        } else {
            self.lr
        }
    }
}

/// One row of the metric history.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub auc: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Wall-clock time, when the caller measured it.
    pub seconds: Option<f64>,
    pub skipped_batches: usize,
}

/// A seeded random permutation of `0..n` cut into consecutive batches; the
/// last batch may be short.
pub fn make_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>, TrainError> {
    if batch_size < 1 {
        return Err(TrainError::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

fn identity_batches(n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    (0..n)
        .collect::<Vec<_>>()
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}

fn is_partition(batches: &[Vec<usize>], n: usize) -> bool {
    let mut seen = alloc::vec![false; n];
    for &i in batches.iter().flatten() {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    seen.into_iter().all(|s| s)
}

/// Predictions for the whole dataset, in chunks. Runs the caching forward
/// pass so layer buffers are reused across chunks.
pub fn predict_all<T: Real>(model: &mut Model<T>, data: &SurvivalDataset, chunk: usize) -> Result<Vec<f64>, NnError> {
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let idx: Vec<usize> = (0..n).collect();
    for part in idx.chunks(chunk.max(1)) {
        let x = data.images.gather::<T>(part);
        out.extend(model.forward(&x)?.into_iter().map(Real::as_f64));
    }
    Ok(out)
}

/// Test loss and metrics for a prediction vector.
pub fn evaluate_predictions(
    f: &[f64],
    test: &[SurvivalRecord],
    cfg: &TrainConfig,
) -> Result<(f64, MetricReport), TrainError> {
    let loss = cfg.loss.eval_objective(cfg.bce_weight).loss(f, test)?;
    let report = MetricReport::compute(f, test, &cfg.subgroup.mask(test), cfg.loss.two_task())?;
    Ok((loss, report))
}

/// Owns a model and steps it through epochs over borrowed data.
pub struct Trainer<'a, T> {
    pub model: Model<T>,
    pub cfg: TrainConfig,
    train: &'a SurvivalDataset,
    test: &'a SurvivalDataset,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(
        model: Model<T>,
        cfg: TrainConfig,
        train: &'a SurvivalDataset,
        test: &'a SurvivalDataset,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if train.is_empty() || test.is_empty() {
            return Err(TrainError::Config("train and test sets must be nonempty".into()));
        }
        for (name, d) in [("train", train), ("test", test)] {
            d.validate()?;
            if d.images.shape()[..] != model.config().input[..] {
                return Err(TrainError::Config(format!(
                    "{name} images are {:?} but the model expects {:?}",
                    d.images.shape(),
                    model.config().input
                )));
            }
        }
        let rng = stream(cfg.seed, BATCH_PURPOSE, Split::Train);
        Ok(Self {
            model,
            cfg,
            train,
            test,
            rng,
            epoch: 0,
        })
    }

    /// Epochs completed so far.
    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Runs one training epoch and evaluates; `seconds` is left unset.
    pub fn step(&mut self) -> Result<EpochMetrics, TrainError> {
        let (train_loss, skipped) = self.train_epoch()?;
        let f = predict_all(&mut self.model, self.test, self.cfg.chunk).map_err(|e| self.numeric(e, 0))?;
        let (test_loss, report) = evaluate_predictions(&f, &self.test.records, &self.cfg)?;
        if !test_loss.is_finite() {
            return Err(TrainError::NumericAbort {
                epoch: self.epoch,
                batch: 0,
            });
        }
        Ok(EpochMetrics {
            epoch: self.epoch,
            train_loss,
            test_loss,
            auc: report.auc,
            c1: report.c1,
            c2: report.c2,
            seconds: None,
            skipped_batches: skipped,
        })
    }

    /// All remaining epochs, calling `on_epoch` after each.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochMetrics)) -> Result<Vec<EpochMetrics>, TrainError> {
        let mut history = Vec::with_capacity(self.cfg.epochs);
        while self.epoch < self.cfg.epochs {
            let m = self.step()?;
            on_epoch(&m);
            history.push(m);
        }
        Ok(history)
    }

    fn numeric(&self, e: NnError, batch: usize) -> TrainError {
        match e {
            NnError::NonFinite { .. } => TrainError::NumericAbort {
                epoch: self.epoch,
                batch,
            },
            other => other.into(),
        }
    }

    /// Returns the batch-size-weighted mean training loss and the number of
    /// skipped zero-event batches.
    fn train_epoch(&mut self) -> Result<(f64, usize), TrainError> {
        self.epoch += 1;
        let lr = self.cfg.lr_at(self.epoch - 1);
        if self.cfg.loss.full_batch() {
            return self.full_step(lr).map(|l| (l, 0));
        }
        let n = self.train.len();
        let batches = if self.cfg.shuffle {
            make_batches(n, self.cfg.batch_size, &mut self.rng)?
        } else {
            identity_batches(n, self.cfg.batch_size)
        };
        debug_assert!(is_partition(&batches, n));
        if !is_partition(&batches, n) {
            return Err(TrainError::Config("batches do not partition the training set".into()));
        }
        let objective = self.cfg.loss.train_objective(self.cfg.bce_weight);
        let mut total = 0.0;
        let mut skipped = 0;
        for (b, idx) in batches.iter().enumerate() {
            let recs: Vec<SurvivalRecord> = idx.iter().map(|&i| self.train.records[i]).collect();
            if objective.vanishes_without_events() && !recs.iter().any(|r| r.event) {
                skipped += 1;
                continue;
            }
            let x = self.train.images.gather::<T>(idx);
            let f: Vec<f64> = self
                .model
                .forward(&x)
                .map_err(|e| self.numeric(e, b))?
                .into_iter()
                .map(Real::as_f64)
                .collect();
            let loss = objective.loss(&f, &recs)?;
            if !loss.is_finite() {
                return Err(TrainError::NumericAbort {
                    epoch: self.epoch,
                    batch: b,
                });
            }
            let grad: Vec<T> = objective.grad(&f, &recs)?.into_iter().map(T::from_f64).collect();
            self.model.zero_grad();
            self.model.backward(&grad).map_err(|e| self.numeric(e, b))?;
            self.model.sgd_step(lr)?;
            total += loss * idx.len() as f64;
        }
        Ok((total / n as f64, skipped))
    }

    fn full_step(&mut self, lr: f64) -> Result<f64, TrainError> {
        let objective = self.cfg.loss.train_objective(self.cfg.bce_weight);
        let records = &self.train.records;
        let f = predict_all(&mut self.model, self.train, self.cfg.chunk).map_err(|e| self.numeric(e, 0))?;
        let loss = objective.loss(&f, records)?;
        if !loss.is_finite() {
            return Err(TrainError::NumericAbort {
                epoch: self.epoch,
                batch: 0,
            });
        }
        let grad = objective.grad(&f, records)?;
        self.model.zero_grad();
        let idx: Vec<usize> = (0..records.len()).collect();
        for (c, part) in idx.chunks(self.cfg.chunk).enumerate() {
            let x = self.train.images.gather::<T>(part);
            self.model.forward(&x).map_err(|e| self.numeric(e, c))?;
            let g: Vec<T> = part.iter().map(|&i| T::from_f64(grad[i])).collect();
            self.model.backward(&g).map_err(|e| self.numeric(e, c))?;
        }
        self.model.sgd_step(lr)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn batch_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = make_batches(4, 2, &mut rng).unwrap();
        assert_eq!(b.len(), 2);
        assert!(is_partition(&b, 4));
        let sizes: Vec<usize> = make_batches(5, 2, &mut rng).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, [2, 2, 1]);
        assert!(make_batches(5, 0, &mut rng).is_err());
        let a = make_batches(100, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = make_batches(100, 7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lr_schedule_decays_at_three_quarters() {
        let cfg = TrainConfig {
            epochs: 8,
            ..TrainConfig::default()
        };
        let rates: Vec<f64> = (0..8).map(|e| cfg.lr_at(e)).collect();
        assert_eq!(rates[5], 0.01);
        assert!((rates[6] - 0.001).abs() < 1e-18);
    }

    #[test]
    fn loss_kind_names_roundtrip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert_eq!("two-task".parse::<LossKind>().unwrap(), LossKind::TwoTaskMini);
        assert!("adam".parse::<LossKind>().is_err());
    }

    #[test]
    fn mini_batch_kinds_need_two() {
        let cfg = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let full = TrainConfig {
            batch_size: 1,
            loss: LossKind::FullBatched,
            ..TrainConfig::default()
        };
        assert!(full.validate().is_ok());
    }
}
