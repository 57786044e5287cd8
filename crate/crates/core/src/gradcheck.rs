//! Central finite-difference audit of every analytic gradient.
//!
//! Losses are checked against their derivative in `f`; layers are checked
//! through small f64 networks built around each layer kind, against the
//! derivative of a random linear read-out of the network output in every
//! parameter. Coordinates whose perturbation changes a relu mask or a max
//! argument are skipped, since the function has a kink there.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, SurvivalError};
use crate::nn::{LayerSpec, Model, ModelConfig, Preset, Tensor};
use crate::survival::{Objective, RiskScope, SurvivalRecord};

pub const LOSS_STEP: f64 = 1e-4;
pub const LOSS_TOL: f64 = 1e-5;
pub const PARAM_STEP: f64 = 1e-3;
pub const LAYER_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckOptions {
    pub trials: usize,
    pub seed: u64,
    /// Negates the mini-batched loss gradient, so the audit must fail.
    pub inject_sign_bug: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 1,
            inject_sign_bug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: &'static str,
    pub family: Family,
    pub trials: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Loss,
    Layer,
}

impl CheckEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub entries: Vec<CheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }

    pub fn count(&self, family: Family) -> usize {
        self.entries.iter().filter(|e| e.family == family).count()
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| (a.max_rel_err / a.tolerance).total_cmp(&(b.max_rel_err / b.tolerance)))
    }
}

/// `|a - n| / max(|a|, |n|)` in the Euclidean norm; 0 when both vanish.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<SurvivalRecord> {
    (0..n)
        .map(|i| {
            // a coarse grid some of the time, so tied times occur
            let time = if rng.random_bool(0.3) {
                rng.random_range(1..=4) as f64
            } else {
                rng.random_range(0.01..5.0)
            };
            let event = rng.random_bool(0.6);
            let label = event || rng.random_bool(0.3);
            SurvivalRecord::new(i as u64, time, event, label)
        })
        .collect()
}

/// Audits one objective on `trials` random instances of size 1 to 50.
pub fn check_loss(
    name: &'static str,
    objective: Objective,
    trials: usize,
    rng: &mut ChaCha8Rng,
    negate: bool,
) -> Result<CheckEntry, SurvivalError> {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..trials {
        let n = rng.random_range(1..=50);
        let recs = random_records(rng, n);
        let mut f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut analytic = objective.grad(&f, &recs)?;
        if negate {
            analytic.iter_mut().for_each(|g| *g = -*g);
        }
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let orig = f[i];
            f[i] = orig + LOSS_STEP;
            let up = objective.loss(&f, &recs)?;
            f[i] = orig - LOSS_STEP;
            let down = objective.loss(&f, &recs)?;
            f[i] = orig;
            numeric[i] = (up - down) / (2.0 * LOSS_STEP);
        }
        checked += n;
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    Ok(CheckEntry {
        name,
        family: Family::Loss,
        trials,
        max_rel_err: worst,
        tolerance: LOSS_TOL,
        checked,
        skipped: 0,
    })
}

/// A small network exercising `kind` on an input of at most 8x8.
fn layer_fixture(kind: &str, rng: &mut ChaCha8Rng) -> Result<ModelConfig, NnError> {
    let h = rng.random_range(4..=8);
    let w = rng.random_range(4..=8);
    let c = rng.random_range(1..=3);
    let filters = rng.random_range(1..=3);
    let kernel = rng.random_range(1..=3usize);
    let padding = rng.random_range(0..=kernel / 2);
    let conv = LayerSpec::Conv2d {
        filters,
        kernel,
        padding,
    };
    let units = rng.random_range(1..=4);
    let head = [LayerSpec::Flatten, LayerSpec::Dense { units: 1 }];
    let layers: Vec<LayerSpec> = match kind {
        "conv2d" | "flatten" => [conv].into_iter().chain(head).collect(),
        "maxpool2d" => [conv, LayerSpec::MaxPool2d { size: 2, stride: 2 }]
            .into_iter()
            .chain(head)
            .collect(),
        "relu" => [conv, LayerSpec::Relu].into_iter().chain(head).collect(),
        "dense" => vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { units },
            LayerSpec::Dense { units: 1 },
        ],
        "sigmoid-head" => vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { units },
            LayerSpec::Sigmoid,
            LayerSpec::Dense { units: 1 },
        ],
        "crop-integrate" => {
            let crops = rng.random_range(1..=5);
            let width = rng.random_range(1..=8);
            let hidden = rng.random_range(1..=6);
            return ModelConfig::custom(&[crops, width], vec![LayerSpec::CropIntegrate { crops, width, hidden }]);
        }
        other => return Err(NnError::Config(String::from(other))),
    };
    ModelConfig::custom(&[h, w, c], layers)
}

pub const LAYER_KINDS: [&str; 5] = ["conv2d", "maxpool2d", "dense", "relu", "flatten"];
pub const EXTRA_LAYER_KINDS: [&str; 2] = ["sigmoid-head", "crop-integrate"];

fn readout(model: &mut Model<f64>, x: &Tensor<f64>, w: &[f64]) -> Result<(f64, u64), NnError> {
    let y = model.forward(x)?;
    let sig = model.signature();
    Ok((y.iter().zip(w).map(|(a, b)| a * b).sum(), sig))
}

/// Audits the parameter gradients of networks built around one layer kind.
pub fn check_layer(kind: &'static str, trials: usize, rng: &mut ChaCha8Rng) -> Result<CheckEntry, NnError> {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for _ in 0..trials {
        let cfg = layer_fixture(kind, rng)?;
        let batch = rng.random_range(1..=5);
        let mut model = Model::<f64>::new(cfg.clone(), rng.random())?;
        // nonzero biases so relu and pool boundaries are not all at zero
        for p in model.params_mut() {
            if p.value.shape().len() == 1 {
                p.value
                    .data_mut()
                    .iter_mut()
                    .for_each(|b| *b = rng.random_range(-0.2..0.2));
            }
        }
        let mut shape = vec![batch];
        shape.extend_from_slice(&cfg.input);
        let len: usize = shape.iter().product();
        let x = Tensor::from_vec(&shape, (0..len).map(|_| rng.random::<f64>()).collect())?;
        let w: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (_, base_sig) = readout(&mut model, &x, &w)?;
        model.zero_grad();
        model.backward(&w)?;
        let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();

        let mut a_kept = Vec::new();
        let mut n_kept = Vec::new();
        for (pi, grads) in analytic.iter().enumerate() {
            for (j, &g) in grads.iter().enumerate() {
                let orig = model.params()[pi].value.data()[j];
                model.params_mut()[pi].value.data_mut()[j] = orig + PARAM_STEP;
                let (up, s_up) = readout(&mut model, &x, &w)?;
                model.params_mut()[pi].value.data_mut()[j] = orig - PARAM_STEP;
                let (down, s_down) = readout(&mut model, &x, &w)?;
                model.params_mut()[pi].value.data_mut()[j] = orig;
                if s_up != base_sig || s_down != base_sig {
                    skipped += 1;
                    continue;
                }
                a_kept.push(g);
                n_kept.push((up - down) / (2.0 * PARAM_STEP));
            }
        }
        // clear the caches left by the last probe
        model.forward(&x)?;
        checked += a_kept.len();
        worst = worst.max(rel_err(&a_kept, &n_kept));
    }
    Ok(CheckEntry {
        name: kind,
        family: Family::Layer,
        trials,
        max_rel_err: worst,
        tolerance: LAYER_TOL,
        checked,
        skipped,
    })
}

/// The four training losses under their audit names.
pub fn audited_losses() -> [(&'static str, Objective); 4] {
    [
        ("full-batched", Objective::Cox(RiskScope::Full)),
        ("mini-batched", Objective::Cox(RiskScope::Batch)),
        ("oracle", Objective::Oracle),
        (
            "two-task",
            Objective::TwoTask {
                scope: RiskScope::Batch,
                bce_weight: 1.0,
            },
        ),
    ]
}

/// Runs the full audit: four losses, the five core layer kinds, and the
/// sigmoid and crop-integration heads.
pub fn run(opts: GradCheckOptions) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    for (name, obj) in audited_losses() {
        let negate = opts.inject_sign_bug && name == "mini-batched";
        let entry = check_loss(name, obj, opts.trials, &mut rng, negate)
            .map_err(|e| NnError::Config(alloc::format!("{name}: {e}")))?;
        report.entries.push(entry);
    }
    for kind in LAYER_KINDS.into_iter().chain(EXTRA_LAYER_KINDS) {
        report.entries.push(check_layer(kind, opts.trials, &mut rng)?);
    }
    Ok(report)
}

/// Crop-integration head with random weights for structural checks.
pub fn integrate_head(seed: u64) -> Result<Model<f64>, NnError> {
    Model::new(ModelConfig::preset(Preset::IntegrateHead, &[5, 128])?, seed)
}
