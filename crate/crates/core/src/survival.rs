//! Cox-model losses on vectors of predicted log relative hazards.
//!
//! Every function here works on a hazard vector `f` that is index-aligned
//! with a slice of [`SurvivalRecord`]s. Nothing in this module sees images.
//!
//! Risk sets are inclusive: subject `j` is at risk at time `t` when
//! `time[j] >= t`, so a failing subject sits in its own denominator and tied
//! times share one another's risk sets (Breslow ties).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Deref;

use num_traits::Float;

use crate::error::SurvivalError;

/// One subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalRecord {
    pub id: u64,
    /// Observed time `min(T, C)`.
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
    /// Disease indicator; only the two-task loss and AUC read it.
    pub label: bool,
    /// Log relative hazard the generator used, when known.
    pub true_log_hazard: Option<f64>,
    /// Largest simulated nodule side in pixels (nodule data only).
    pub nodule_size: Option<u32>,
}

impl SurvivalRecord {
    pub fn new(id: u64, time: f64, event: bool, label: bool) -> Self {
        Self {
            id,
            time,
            event,
            label,
            true_log_hazard: None,
            nodule_size: None,
        }
    }

    pub fn validate(&self) -> Result<(), SurvivalError> {
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(SurvivalError::InvalidTime {
                id: self.id,
                time: self.time,
            });
        }
        Ok(())
    }
}

/// Predicted log relative hazards, one per record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HazardVector(Vec<f64>);

impl HazardVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SurvivalError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SurvivalError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for HazardVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Right-continuous step function, zero before the first knot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Builds from strictly increasing knots and nondecreasing nonnegative values.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, SurvivalError> {
        if knots.len() != values.len() {
            return Err(SurvivalError::LengthMismatch {
                expected: knots.len(),
                got: values.len(),
            });
        }
        let increasing = knots.windows(2).all(|w| w[0] < w[1]);
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        if !increasing || !monotone || values.first().is_some_and(|v| *v < 0.0) {
            return Err(SurvivalError::InvalidStepFunction);
        }
        Ok(Self { knots, values })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the largest knot `<= t`, or 0 before the first knot.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|k| *k <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }
}

/// Indices `j` with `times[j] >= t`.
pub fn risk_set(times: &[f64], t: f64) -> Vec<usize> {
    times
        .iter()
        .enumerate()
        .filter(|(_, tj)| **tj >= t)
        .map(|(j, _)| j)
        .collect()
}

fn check_aligned(f: &[f64], records: &[SurvivalRecord]) -> Result<(), SurvivalError> {
    if f.len() != records.len() {
        return Err(SurvivalError::LengthMismatch {
            expected: records.len(),
            got: f.len(),
        });
    }
    if records.is_empty() {
        return Err(SurvivalError::EmptyBatch);
    }
    Ok(())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + Float::ln_1p(Float::exp(-(a - b).abs()))
}

/// Indices sorted by decreasing time.
fn order_by_time_desc(records: &[SurvivalRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time.partial_cmp(&records[a].time).unwrap_or(Ordering::Equal));
    order
}

/// `log sum_{k in R(t_i)} exp(f_k)` for every record, via one sweep from the
/// latest time backwards. Tied times are folded in as a group before any of
/// them reads the running sum.
fn risk_log_sums(f: &[f64], records: &[SurvivalRecord]) -> Vec<f64> {
    let order = order_by_time_desc(records);
    let mut out = vec![0.0; records.len()];
    let mut running = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time;
        let mut end = start;
        while end < order.len() && records[order[end]].time == t {
            running = log_add_exp(running, f[order[end]]);
            end += 1;
        }
        for &i in &order[start..end] {
            out[i] = running;
        }
        start = end;
    }
    out
}

/// Averaged negative log partial likelihood over the whole set.
///
/// `-(1/n) sum_i d_i [f_i - log sum_{j in R(t_i)} exp(f_j)]`, in O(n log n).
pub fn cox_full_loss(f: &[f64], records: &[SurvivalRecord]) -> Result<f64, SurvivalError> {
    check_aligned(f, records)?;
    let lse = risk_log_sums(f, records);
    let total: f64 = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.event)
        .map(|(i, _)| f[i] - lse[i])
        .sum();
    Ok(-total / records.len() as f64)
}

/// Gradient of [`cox_full_loss`] with respect to `f`.
///
/// `dL/df_m = -(1/n) [d_m - sum_{i: d_i, t_i <= t_m} exp(f_m - lse_i)]`; the
/// inner sum is carried forward in time as a log-sum of `-lse_i`.
pub fn cox_full_grad(f: &[f64], records: &[SurvivalRecord]) -> Result<Vec<f64>, SurvivalError> {
    check_aligned(f, records)?;
    let n = records.len() as f64;
    let lse = risk_log_sums(f, records);
    let mut order = order_by_time_desc(records);
    order.reverse();
    let mut grad = vec![0.0; records.len()];
    let mut acc = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time;
        let mut end = start;
        while end < order.len() && records[order[end]].time == t {
            let i = order[end];
            if records[i].event {
                acc = log_add_exp(acc, -lse[i]);
            }
            end += 1;
        }
        for &m in &order[start..end] {
            let share = if acc == f64::NEG_INFINITY {
                0.0
            } else {
                Float::exp(f[m] + acc)
            };
            let d = if records[m].event { 1.0 } else { 0.0 };
            grad[m] = -(d - share) / n;
        }
        start = end;
    }
    Ok(grad)
}

/// Loss with risk sets confined to the batch, normalized by the batch size.
///
/// `f` and `batch` are the gathered batch. Risk sets are enumerated
/// directly, which is O(|batch|^2) and independent of the sorted sweep used
/// by [`cox_full_loss`].
pub fn cox_minibatch_loss(f: &[f64], batch: &[SurvivalRecord]) -> Result<f64, SurvivalError> {
    check_aligned(f, batch)?;
    let mut total = 0.0;
    for (i, ri) in batch.iter().enumerate() {
        if !ri.event {
            continue;
        }
        let mut max = f64::NEG_INFINITY;
        for (j, rj) in batch.iter().enumerate() {
            if rj.time >= ri.time {
                max = max.max(f[j]);
            }
        }
        let mut sum = 0.0;
        for (j, rj) in batch.iter().enumerate() {
            if rj.time >= ri.time {
                sum += Float::exp(f[j] - max);
            }
        }
        total += f[i] - (max + Float::ln(sum));
    }
    Ok(-total / batch.len() as f64)
}

/// Gradient of [`cox_minibatch_loss`] with respect to the batch hazards.
pub fn cox_minibatch_grad(f: &[f64], batch: &[SurvivalRecord]) -> Result<Vec<f64>, SurvivalError> {
    check_aligned(f, batch)?;
    let n = batch.len() as f64;
    let mut grad: Vec<f64> = batch.iter().map(|r| if r.event { -1.0 / n } else { 0.0 }).collect();
    for ri in batch.iter().filter(|r| r.event) {
        let max = batch
            .iter()
            .zip(f)
            .filter(|(rj, _)| rj.time >= ri.time)
            .map(|(_, fj)| *fj)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = batch
            .iter()
            .zip(f)
            .filter(|(rj, _)| rj.time >= ri.time)
            .map(|(_, fj)| Float::exp(fj - max))
            .sum();
        for (m, rm) in batch.iter().enumerate() {
            if rm.time >= ri.time {
                grad[m] += Float::exp(f[m] - max) / denom / n;
            }
        }
    }
    Ok(grad)
}

/// Negative log-likelihood with known baseline `Lambda0(t) = t`.
///
/// `-(1/n) sum_i [d_i f_i - exp(f_i) t_i]`; the batched and full forms are
/// the same expression over whichever records are passed.
pub fn oracle_loss(f: &[f64], records: &[SurvivalRecord]) -> Result<f64, SurvivalError> {
    check_aligned(f, records)?;
    let total: f64 = records
        .iter()
        .zip(f)
        .map(|(r, fi)| {
            let d = if r.event { *fi } else { 0.0 };
            d - Float::exp(*fi) * r.time
        })
        .sum();
    Ok(-total / records.len() as f64)
}

pub fn oracle_grad(f: &[f64], records: &[SurvivalRecord]) -> Result<Vec<f64>, SurvivalError> {
    check_aligned(f, records)?;
    let n = records.len() as f64;
    Ok(records
        .iter()
        .zip(f)
        .map(|(r, fi)| {
            let d = if r.event { 1.0 } else { 0.0 };
            -(d - Float::exp(*fi) * r.time) / n
        })
        .collect())
}

/// Baseline hazard `lambda0` and its integral `Lambda0`.
pub trait BaselineHazard {
    fn rate(&self, t: f64) -> f64;
    fn cumulative(&self, t: f64) -> f64;
}

/// `lambda0(t) = c`, `Lambda0(t) = c t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHazard(pub f64);

impl BaselineHazard for ConstantHazard {
    fn rate(&self, _t: f64) -> f64 {
        self.0
    }

    fn cumulative(&self, t: f64) -> f64 {
        self.0 * t
    }
}

impl<R, C> BaselineHazard for (R, C)
where
    R: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    fn rate(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    fn cumulative(&self, t: f64) -> f64 {
        (self.1)(t)
    }
}

/// Full negative log-likelihood under a given baseline hazard.
///
/// `-(1/n) sum_i { d_i [f_i + log lambda0(t_i)] - Lambda0(t_i) exp(f_i) }`.
/// With `f` set to the generating log hazards this is the "true loss"
/// reference for simulated data.
pub fn full_nll<B: BaselineHazard + ?Sized>(
    f: &[f64],
    records: &[SurvivalRecord],
    baseline: &B,
) -> Result<f64, SurvivalError> {
    check_aligned(f, records)?;
    let mut total = 0.0;
    for (i, (r, fi)) in records.iter().zip(f).enumerate() {
        if r.event {
            let rate = baseline.rate(r.time);
            if rate.is_nan() || rate <= 0.0 {
                return Err(SurvivalError::NonPositiveHazard { index: i });
            }
            total += fi + Float::ln(rate);
        }
        total -= baseline.cumulative(r.time) * Float::exp(*fi);
    }
    Ok(-total / records.len() as f64)
}

/// Breslow estimate of the cumulative baseline hazard.
///
/// Knots sit at distinct event times; each adds `events_at_t / S(t)` where
/// `S(t) = sum_{k: t_k >= t} exp(f_k)`.
pub fn breslow_cumhaz(f: &[f64], records: &[SurvivalRecord]) -> Result<StepFunction, SurvivalError> {
    if f.len() != records.len() {
        return Err(SurvivalError::LengthMismatch {
            expected: records.len(),
            got: f.len(),
        });
    }
    let lse = risk_log_sums(f, records);
    let mut events: Vec<usize> = (0..records.len()).filter(|&i| records[i].event).collect();
    events.sort_by(|&a, &b| records[a].time.partial_cmp(&records[b].time).unwrap_or(Ordering::Equal));
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut cum = 0.0;
    for i in events {
        let t = records[i].time;
        cum += Float::exp(-lse[i]);
        if knots.last() == Some(&t) {
            *values.last_mut().unwrap() = cum;
        } else {
            knots.push(t);
            values.push(cum);
        }
    }
    StepFunction::new(knots, values)
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + Float::exp(-x))
    } else {
        let e = Float::exp(x);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + Float::ln_1p(Float::exp(-x))
    } else {
        Float::ln_1p(Float::exp(x))
    }
}

/// Mean binary cross-entropy of `sigmoid(f)` against `labels`, computed from
/// the logits directly.
pub fn bce_loss(f: &[f64], labels: &[bool]) -> Result<f64, SurvivalError> {
    if f.len() != labels.len() {
        return Err(SurvivalError::LengthMismatch {
            expected: labels.len(),
            got: f.len(),
        });
    }
    if f.is_empty() {
        return Err(SurvivalError::EmptyBatch);
    }
    // -[y log p + (1-y) log(1-p)] = softplus(f) - y f
    let total: f64 = f
        .iter()
        .zip(labels)
        .map(|(fi, y)| softplus(*fi) - if *y { *fi } else { 0.0 })
        .sum();
    Ok(total / f.len() as f64)
}

/// `(sigmoid(f_i) - y_i) / n`.
pub fn bce_grad(f: &[f64], labels: &[bool]) -> Result<Vec<f64>, SurvivalError> {
    if f.len() != labels.len() {
        return Err(SurvivalError::LengthMismatch {
            expected: labels.len(),
            got: f.len(),
        });
    }
    if f.is_empty() {
        return Err(SurvivalError::EmptyBatch);
    }
    let n = f.len() as f64;
    Ok(f.iter()
        .zip(labels)
        .map(|(fi, y)| (sigmoid(*fi) - if *y { 1.0 } else { 0.0 }) / n)
        .collect())
}

/// How the Cox term of a loss builds its risk sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskScope {
    /// Sorted sweep; intended for the whole data set.
    Full,
    /// Direct enumeration inside the batch.
    Batch,
}

/// Cox partial-likelihood term plus `bce_weight` times binary cross-entropy.
///
/// Both terms share the single `1/|batch|` prefactor, so the default weight
/// of 1 sums them with equal weight.
pub fn two_task_loss(
    f: &[f64],
    records: &[SurvivalRecord],
    scope: RiskScope,
    bce_weight: f64,
) -> Result<f64, SurvivalError> {
    check_aligned(f, records)?;
    let cox = match scope {
        RiskScope::Full => cox_full_loss(f, records)?,
        RiskScope::Batch => cox_minibatch_loss(f, records)?,
    };
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
    Ok(cox + bce_weight * bce_loss(f, &labels)?)
}

pub fn two_task_grad(
    f: &[f64],
    records: &[SurvivalRecord],
    scope: RiskScope,
    bce_weight: f64,
) -> Result<Vec<f64>, SurvivalError> {
    check_aligned(f, records)?;
    let mut grad = match scope {
        RiskScope::Full => cox_full_grad(f, records)?,
        RiskScope::Batch => cox_minibatch_grad(f, records)?,
    };
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
    for (g, b) in grad.iter_mut().zip(bce_grad(f, &labels)?) {
        *g += bce_weight * b;
    }
    Ok(grad)
}

/// The objectives a network can be trained against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Known baseline `Lambda0(t) = t`.
    Oracle,
    /// Cox partial likelihood.
    Cox(RiskScope),
    /// Cox partial likelihood plus weighted BCE on the shared output.
    TwoTask { scope: RiskScope, bce_weight: f64 },
}

impl Objective {
    /// Whether a batch without events yields a zero loss and zero gradient.
    pub fn vanishes_without_events(&self) -> bool {
        matches!(self, Objective::Cox(_))
    }

    pub fn loss(&self, f: &[f64], records: &[SurvivalRecord]) -> Result<f64, SurvivalError> {
        match *self {
            Objective::Oracle => oracle_loss(f, records),
            Objective::Cox(RiskScope::Full) => cox_full_loss(f, records),
            Objective::Cox(RiskScope::Batch) => cox_minibatch_loss(f, records),
            Objective::TwoTask { scope, bce_weight } => two_task_loss(f, records, scope, bce_weight),
        }
    }

    pub fn grad(&self, f: &[f64], records: &[SurvivalRecord]) -> Result<Vec<f64>, SurvivalError> {
        match *self {
            Objective::Oracle => oracle_grad(f, records),
            Objective::Cox(RiskScope::Full) => cox_full_grad(f, records),
            Objective::Cox(RiskScope::Batch) => cox_minibatch_grad(f, records),
            Objective::TwoTask { scope, bce_weight } => two_task_grad(f, records, scope, bce_weight),
        }
    }
}
