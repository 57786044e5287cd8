//! Seeded generators for the three simulation studies.
//!
//! Every generator is a pure function of its inputs and seed. Random draws
//! for different purposes use separate ChaCha streams so that, for example,
//! changing the censoring rule does not perturb the event times.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::nn::{Real, Tensor};
use crate::survival::SurvivalRecord;

/// A collection of equally shaped 8-bit images, stored contiguously in HWC
/// order. Byte `k` stands for the intensity `k / 255`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Images {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl Images {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            pixels: Vec::new(),
        }
    }

    pub fn from_pixels(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, DataError> {
        let per = height * width * channels;
        if per == 0 || pixels.len() % per != 0 {
            return Err(DataError::Config(format!(
                "{} bytes is not a whole number of {height}x{width}x{channels} images",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn len(&self) -> usize {
        self.pixels.len().checked_div(self.image_len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn get(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [u8] {
        let n = self.image_len();
        &mut self.pixels[i * n..(i + 1) * n]
    }

    pub fn push(&mut self, image: &[u8]) {
        assert_eq!(image.len(), self.image_len(), "image size");
        self.pixels.extend_from_slice(image);
    }

    /// Intensity in `[0, 1]` of pixel `(y, x, c)` of image `i`.
    pub fn value(&self, i: usize, y: usize, x: usize, c: usize) -> f64 {
        self.get(i)[(y * self.width + x) * self.channels + c] as f64 / 255.0
    }

    /// Stacks the selected images into an `[n, h, w, c]` tensor in `[0, 1]`.
    pub fn gather<T: Real>(&self, indices: &[usize]) -> Tensor<T> {
        let n = self.image_len();
        let lut: Vec<T> = (0..256).map(|b| T::from_f64(b as f64 / 255.0)).collect();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend(self.get(i).iter().map(|&b| lut[b as usize]));
        }
        Tensor::from_vec(&[indices.len(), self.height, self.width, self.channels], data).expect("gather shape")
    }
}

/// Records, their images, and how they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    pub records: Vec<SurvivalRecord>,
    pub images: Images,
    pub provenance: Provenance,
}

impl SurvivalDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.images.len() != self.records.len() {
            return Err(DataError::Config(format!(
                "{} records but {} images",
                self.records.len(),
                self.images.len()
            )));
        }
        for r in &self.records {
            r.validate().map_err(|e| DataError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Generator name, seed and the parameters in effect, as printable pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorMode {
    /// Every record is an event.
    None,
    /// Within each class, half of the records above the class median are
    /// relabeled as censored with their time unchanged.
    MedianHalf,
    /// Nodule data: only cancer cases can be events.
    Nodule,
}

impl CensorMode {
    pub fn name(self) -> &'static str {
        match self {
            CensorMode::None => "none",
            CensorMode::MedianHalf => "median-half",
            CensorMode::Nodule => "nodule",
        }
    }
}

/// Nodule drawing and hazard parameters. Side ranges are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct NoduleParams {
    pub dots: usize,
    pub dot_side: (u32, u32),
    pub patches: usize,
    pub censored_patch_side: (u32, u32),
    pub event_patch_side: (u32, u32),
    /// Log relative hazard per pixel of the largest nodule side.
    pub alpha: f64,
    pub prevalence: f64,
    /// Probability that a cancer case is an observed event.
    pub cancer_event_rate: f64,
}

impl Default for NoduleParams {
    fn default() -> Self {
        Self {
            dots: 20,
            dot_side: (1, 2),
            patches: 2,
            censored_patch_side: (3, 5),
            event_patch_side: (5, 8),
            alpha: 0.25,
            prevalence: 0.5,
            cancer_event_rate: 0.5,
        }
    }
}

impl NoduleParams {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, (lo, hi)) in [
            ("dot_side", self.dot_side),
            ("censored_patch_side", self.censored_patch_side),
            ("event_patch_side", self.event_patch_side),
        ] {
            if lo == 0 || lo > hi {
                return Err(DataError::Config(format!(
                    "{name} range {lo}..={hi} must be nonempty and positive"
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(DataError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, p) in [
            ("prevalence", self.prevalence),
            ("cancer_event_rate", self.cancer_event_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.patches == 0 {
            return Err(DataError::Config("patches must be positive".into()));
        }
        Ok(())
    }

    /// Censored cases should have the smaller patches; overlap is allowed.
    pub fn ranges_overlap(&self) -> bool {
        self.censored_patch_side.1 >= self.event_patch_side.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    /// `(class, phi)` pairs; the second class is the positive label.
    pub phi_map: Vec<(u8, f64)>,
    pub censor_mode: CensorMode,
    pub train: usize,
    pub test: usize,
    pub nodule: NoduleParams,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.train == 0 || self.test == 0 {
            return Err(DataError::Config("split sizes must be positive".into()));
        }
        if self.phi_map.iter().any(|(_, p)| !p.is_finite()) {
            return Err(DataError::Config("phi values must be finite".into()));
        }
        self.nodule.validate()
    }

    pub fn phi(&self, class: u8) -> Option<f64> {
        self.phi_map.iter().find(|(c, _)| *c == class).map(|(_, p)| *p)
    }

    fn params(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("censor_mode".to_string(), self.censor_mode.name().to_string()),
            ("train".to_string(), self.train.to_string()),
            ("test".to_string(), self.test.to_string()),
        ];
        for (c, p) in &self.phi_map {
            out.push((format!("phi.{c}"), format!("{p}")));
        }
        if self.censor_mode == CensorMode::Nodule {
            let n = &self.nodule;
            out.extend([
                ("nodule.dots".to_string(), n.dots.to_string()),
                (
                    "nodule.dot_side".to_string(),
                    format!("{}..={}", n.dot_side.0, n.dot_side.1),
                ),
                ("nodule.patches".to_string(), n.patches.to_string()),
                (
                    "nodule.censored_patch_side".to_string(),
                    format!("{}..={}", n.censored_patch_side.0, n.censored_patch_side.1),
                ),
                (
                    "nodule.event_patch_side".to_string(),
                    format!("{}..={}", n.event_patch_side.0, n.event_patch_side.1),
                ),
                ("nodule.alpha".to_string(), format!("{}", n.alpha)),
                ("nodule.prevalence".to_string(), format!("{}", n.prevalence)),
                (
                    "nodule.cancer_event_rate".to_string(),
                    format!("{}", n.cancer_event_rate),
                ),
            ]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Independent RNG for `(seed, purpose, split)`.
pub fn stream(seed: u64, purpose: u64, split: Split) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose * 2 + matches!(split, Split::Test) as u64);
    rng
}

pub(crate) mod purpose {
    pub const BASE_IMAGES: u64 = 1;
    pub const EVENT_TIMES: u64 = 2;
    pub const CENSORING: u64 = 3;
    pub const NODULES: u64 = 4;
    pub const CROPS: u64 = 5;
}

/// Exponential draw with rate `exp(phi)` by inverse CDF.
pub fn sample_event_time<R: Rng + ?Sized>(phi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / phi.exp()
}

/// Survival data on a two-class image collection (Simulations A and B).
pub fn gen_sim_ab(
    images: &Images,
    classes: &[u8],
    cfg: &GenConfig,
    split: Split,
) -> Result<SurvivalDataset, DataError> {
    if images.len() != classes.len() {
        return Err(DataError::Config(format!(
            "{} images but {} class labels",
            images.len(),
            classes.len()
        )));
    }
    if cfg.phi_map.len() != 2 {
        return Err(DataError::Config(format!(
            "two classes need two phi entries, got {}",
            cfg.phi_map.len()
        )));
    }
    if cfg.censor_mode == CensorMode::Nodule {
        return Err(DataError::Config("nodule censoring applies to nodule data only".into()));
    }
    let mut phis = Vec::with_capacity(classes.len());
    for &c in classes {
        phis.push(
            cfg.phi(c)
                .ok_or_else(|| DataError::Config(format!("no phi for class {c}")))?,
        );
    }
    let positive = cfg.phi_map[1].0;
    let mut rng = stream(cfg.seed, purpose::EVENT_TIMES, split);
    let mut records: Vec<SurvivalRecord> = classes
        .iter()
        .zip(&phis)
        .enumerate()
        .map(|(i, (&c, &phi))| {
            let mut r = SurvivalRecord::new(i as u64, sample_event_time(phi, &mut rng), true, c == positive);
            r.true_log_hazard = Some(phi);
            r
        })
        .collect();

    if cfg.censor_mode == CensorMode::MedianHalf {
        let mut rng = stream(cfg.seed, purpose::CENSORING, split);
        for &(class, _) in &cfg.phi_map {
            let members: Vec<usize> = (0..records.len()).filter(|&i| classes[i] == class).collect();
            let times: Vec<f64> = members.iter().map(|&i| records[i].time).collect();
            let Some(m) = median(&times) else { continue };
            let mut above: Vec<usize> = members.into_iter().filter(|&i| records[i].time > m).collect();
            let k = above.len() / 2;
            above.shuffle(&mut rng);
            for &i in &above[..k] {
                records[i].event = false;
            }
        }
    }

    let mut provenance = Provenance {
        generator: "sim-ab".into(),
        seed: cfg.seed,
        params: cfg.params(),
    };
    provenance.params.push(("split".into(), split_name(split).into()));
    Ok(SurvivalDataset {
        records,
        images: images.clone(),
        provenance,
    })
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

/// Sample median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Draws `count` nodule-style records on top of `base` images (Simulation C).
///
/// Base images are used in order, wrapping around if there are fewer than
/// `count`. Every image gets benign dots; cancer images also get white
/// square patches whose side drives the hazard.
pub fn gen_nodule_cifar(
    base: &Images,
    count: usize,
    cfg: &GenConfig,
    split: Split,
) -> Result<SurvivalDataset, DataError> {
    let p = &cfg.nodule;
    p.validate()?;
    if base.is_empty() || count == 0 {
        return Err(DataError::Config(
            "nodule data needs base images and a positive count".into(),
        ));
    }
    let max_side = p.dot_side.1.max(p.event_patch_side.1).max(p.censored_patch_side.1) as usize;
    if base.height < max_side || base.width < max_side {
        return Err(DataError::Config(format!(
            "base images {}x{} smaller than nodule side {max_side}",
            base.height, base.width
        )));
    }
    let mut rng = stream(cfg.seed, purpose::NODULES, split);
    let mut time_rng = stream(cfg.seed, purpose::EVENT_TIMES, split);
    let mut images = Images::new(base.height, base.width, base.channels);
    images.pixels.reserve(count * base.image_len());
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        images.push(base.get(i % base.len()));
        let cancer = rng.random_bool(p.prevalence);
        let event = cancer && rng.random_bool(p.cancer_event_rate);
        let img = images.get_mut(i);
        let mut largest = 0;
        for _ in 0..p.dots {
            let side = rng.random_range(p.dot_side.0..=p.dot_side.1);
            let shade = if rng.random_bool(0.5) { 255 } else { 0 };
            draw_square(
                img,
                base.height,
                base.width,
                base.channels,
                side as usize,
                shade,
                &mut rng,
            );
            largest = largest.max(side);
        }
        if cancer {
            let range = if event {
                p.event_patch_side
            } else {
                p.censored_patch_side
            };
            largest = 0;
            for _ in 0..p.patches {
                let side = rng.random_range(range.0..=range.1);
                draw_square(
                    img,
                    base.height,
                    base.width,
                    base.channels,
                    side as usize,
                    255,
                    &mut rng,
                );
                largest = largest.max(side);
            }
        }
        let phi = p.alpha * largest as f64;
        let mut r = SurvivalRecord::new(i as u64, sample_event_time(phi, &mut time_rng), event, cancer);
        r.true_log_hazard = Some(phi);
        r.nodule_size = Some(largest);
        records.push(r);
    }
    let mut provenance = Provenance {
        generator: "nodule-cifar".into(),
        seed: cfg.seed,
        params: cfg.params(),
    };
    provenance.params.push(("split".into(), split_name(split).into()));
    Ok(SurvivalDataset {
        records,
        images,
        provenance,
    })
}

fn draw_square<R: Rng + ?Sized>(img: &mut [u8], h: usize, w: usize, c: usize, side: usize, shade: u8, rng: &mut R) {
    let y0 = rng.random_range(0..=h - side);
    let x0 = rng.random_range(0..=w - side);
    for y in y0..y0 + side {
        let row = (y * w + x0) * c;
        img[row..row + side * c].fill(shade);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    /// 28x28x1 hollow rings (class 0) and vertical bars (class 1).
    TwoClassShapes,
    /// 32x32x3 uniform noise.
    Noise32,
}

/// Offline stand-ins for the digit and natural-image corpora.
///
/// Returns the images and one class per image; `Noise32` classes are all 0.
pub fn synth_base_images(kind: BaseKind, n: usize, seed: u64, split: Split) -> (Images, Vec<u8>) {
    let mut rng = stream(seed, purpose::BASE_IMAGES, split);
    match kind {
        BaseKind::Noise32 => {
            let mut pixels = vec![0u8; n * 32 * 32 * 3];
            rng.fill(&mut pixels[..]);
            (
                Images::from_pixels(32, 32, 3, pixels).unwrap_or(Images::new(32, 32, 3)),
                vec![0; n],
            )
        }
        BaseKind::TwoClassShapes => {
            let mut images = Images::new(28, 28, 1);
            images.pixels.reserve(n * 784);
            let mut classes = Vec::with_capacity(n);
            for i in 0..n {
                let class = (i % 2) as u8;
                let img = if class == 0 { ring(&mut rng) } else { bar(&mut rng) };
                images.push(&img);
                classes.push(class);
            }
            (images, classes)
        }
    }
}

fn ring<R: Rng + ?Sized>(rng: &mut R) -> [u8; 784] {
    let mut img = [0u8; 784];
    let cy = 13.5 + rng.random_range(-2.0..=2.0);
    let cx = 13.5 + rng.random_range(-2.0..=2.0);
    let radius: f64 = rng.random_range(7.0..=10.0);
    let half_width: f64 = rng.random_range(0.8..=1.3);
    let ink: f64 = rng.random_range(180.0..=255.0);
    for y in 0..28 {
        for x in 0..28 {
            let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
            let cover = (half_width + 0.5 - (d - radius).abs()).clamp(0.0, 1.0);
            img[y * 28 + x] = (ink * cover).round() as u8;
        }
    }
    img
}

fn bar<R: Rng + ?Sized>(rng: &mut R) -> [u8; 784] {
    let mut img = [0u8; 784];
    let width = rng.random_range(3..=4usize);
    // always covers the two center columns
    let left = rng.random_range(15 - width..=13);
    let height = rng.random_range(14..=22usize);
    let top = rng.random_range(2..=(26 - height));
    let ink: u8 = rng.random_range(180..=255);
    for y in top..top + height {
        for x in left..left + width {
            img[y * 28 + x] = ink;
        }
    }
    img
}

/// Synthetic per-crop feature vectors for the integration head.
///
/// Each sample has `crops` feature vectors in `[0, 1]^width`; feature 0 plays
/// the nodule malignancy and the hazard is `alpha` times its largest value
/// over crops. Returns an `[n, crops, width]` tensor and the records.
pub fn synth_crop_features(
    n: usize,
    crops: usize,
    width: usize,
    alpha: f64,
    seed: u64,
) -> (Tensor<f64>, Vec<SurvivalRecord>) {
    let mut rng = stream(seed, purpose::CROPS, Split::Train);
    let mut data = Vec::with_capacity(n * crops * width);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut top = 0.0f64;
        for _ in 0..crops {
            for j in 0..width {
                let v: f64 = rng.random();
                if j == 0 {
                    top = top.max(v);
                }
                data.push(v);
            }
        }
        let phi = alpha * top;
        let mut r = SurvivalRecord::new(i as u64, sample_event_time(phi, &mut rng), true, top > 0.5);
        r.true_log_hazard = Some(phi);
        records.push(r);
    }
    (Tensor::from_vec(&[n, crops, width], data).expect("crop shape"), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_config(mode: CensorMode) -> GenConfig {
        GenConfig {
            seed: 11,
            phi_map: vec![(0, 0.0), (1, 1.0)],
            censor_mode: mode,
            train: 2000,
            test: 1000,
            nodule: NoduleParams::default(),
        }
    }

    #[test]
    fn exponential_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (phi, mean, tol) in [(0.0, 1.0, 0.02), (1.0, (-1.0f64).exp(), 0.01)] {
            let s: f64 = (0..100_000).map(|_| sample_event_time(phi, &mut rng)).sum();
            assert!((s / 1e5 - mean).abs() < tol, "phi {phi}: {}", s / 1e5);
        }
    }

    #[test]
    fn event_times_repeat_for_a_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| sample_event_time(0.3, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn sim_a_all_events_and_b_censors_a_quarter_above_median() {
        let (images, classes) = synth_base_images(BaseKind::TwoClassShapes, 2000, 3, Split::Train);
        let a = gen_sim_ab(&images, &classes, &ab_config(CensorMode::None), Split::Train).unwrap();
        assert!(a.records.iter().all(|r| r.event));

        let b = gen_sim_ab(&images, &classes, &ab_config(CensorMode::MedianHalf), Split::Train).unwrap();
        for class in [0u8, 1] {
            let idx: Vec<usize> = (0..2000).filter(|&i| classes[i] == class).collect();
            let times: Vec<f64> = idx.iter().map(|&i| b.records[i].time).collect();
            let m = median(&times).unwrap();
            let censored: Vec<usize> = idx.iter().copied().filter(|&i| !b.records[i].event).collect();
            assert_eq!(censored.len(), 250);
            assert!(censored.iter().all(|&i| b.records[i].time > m));
            // censoring relabels only
            assert!(idx.iter().all(|&i| a.records[i].time == b.records[i].time));
        }
    }

    #[test]
    fn missing_phi_is_a_config_error() {
        let (images, _) = synth_base_images(BaseKind::TwoClassShapes, 4, 3, Split::Train);
        let err = gen_sim_ab(&images, &[0, 1, 2, 1], &ab_config(CensorMode::None), Split::Train).unwrap_err();
        assert!(matches!(err, DataError::Config(_)));
    }

    #[test]
    fn shapes_separate_by_center_columns() {
        let (images, classes) = synth_base_images(BaseKind::TwoClassShapes, 1000, 8, Split::Test);
        let score = |i: usize| {
            (0..28)
                .map(|y| images.value(i, y, 13, 0) + images.value(i, y, 14, 0))
                .sum::<f64>()
        };
        let ring_max = (0..1000).filter(|&i| classes[i] == 0).map(score).fold(0.0, f64::max);
        let bar_min = (0..1000)
            .filter(|&i| classes[i] == 1)
            .map(score)
            .fold(f64::MAX, f64::min);
        assert!(ring_max < bar_min, "{ring_max} vs {bar_min}");
    }

    #[test]
    fn noise_mean_is_half() {
        let (images, _) = synth_base_images(BaseKind::Noise32, 1000, 2, Split::Train);
        let mean = images.pixels.iter().map(|&b| b as f64 / 255.0).sum::<f64>() / images.pixels.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn nodule_records_follow_group_rules() {
        let (base, _) = synth_base_images(BaseKind::Noise32, 50, 2, Split::Train);
        let mut cfg = ab_config(CensorMode::Nodule);
        cfg.phi_map.clear();
        let d = gen_nodule_cifar(&base, 400, &cfg, Split::Train).unwrap();
        for r in &d.records {
            assert!(!r.event || r.label);
            let size = r.nodule_size.unwrap();
            match (r.label, r.event) {
                (false, _) => assert!((1..=2).contains(&size)),
                (true, true) => assert!((5..=8).contains(&size)),
                (true, false) => assert!((3..=5).contains(&size)),
            }
            assert_eq!(r.true_log_hazard, Some(0.25 * size as f64));
        }
        let again = gen_nodule_cifar(&base, 400, &cfg, Split::Train).unwrap();
        assert_eq!(d, again);
    }
}
