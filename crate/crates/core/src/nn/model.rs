use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Conv2d, CropIntegrate, Dense, Flatten, MaxPool2d, Param, Relu, Sigmoid};
use super::{Real, Tensor};
use crate::error::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
    SimC,
    IntegrateHead,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::SimC => "simc",
            Preset::IntegrateHead => "integrate-head",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table1" => Ok(Preset::Table1),
            "simc" => Ok(Preset::SimC),
            "integrate-head" => Ok(Preset::IntegrateHead),
            "custom" => Ok(Preset::Custom),
            other => Err(NnError::Config(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: usize,
        padding: usize,
    },
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    Dense {
        units: usize,
    },
    Flatten,
    Relu,
    Sigmoid,
    CropIntegrate {
        crops: usize,
        width: usize,
        hidden: usize,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid-head",
            LayerSpec::CropIntegrate { .. } => "crop-integrate",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let bad = |why: &str| NnError::Config(format!("{} on input {:?}: {}", self.kind(), input, why));
        match *self {
            LayerSpec::Conv2d {
                filters,
                kernel,
                padding,
            } => {
                if filters == 0 || kernel == 0 {
                    return Err(bad("filters and kernel must be positive"));
                }
                let [h, w, _c] = input else {
                    return Err(bad("expected [h, w, c]"));
                };
                let oh = (h + 2 * padding)
                    .checked_sub(kernel)
                    .ok_or_else(|| bad("kernel exceeds input"))?
                    + 1;
                let ow = (w + 2 * padding)
                    .checked_sub(kernel)
                    .ok_or_else(|| bad("kernel exceeds input"))?
                    + 1;
                Ok(vec![oh, ow, filters])
            }
            LayerSpec::MaxPool2d { size, stride } => {
                if size == 0 || stride == 0 {
                    return Err(bad("size and stride must be positive"));
                }
                let [h, w, c] = input else {
                    return Err(bad("expected [h, w, c]"));
                };
                if *h < size || *w < size {
                    return Err(bad("window exceeds input"));
                }
                Ok(vec![(h - size) / stride + 1, (w - size) / stride + 1, *c])
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(bad("units must be positive"));
                }
                if input.len() != 1 {
                    return Err(bad("expected a flat input"));
                }
                Ok(vec![units])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input.to_vec()),
            LayerSpec::CropIntegrate { crops, width, hidden } => {
                if crops == 0 || width == 0 || hidden == 0 {
                    return Err(bad("dimensions must be positive"));
                }
                if input != [crops, width] {
                    return Err(bad(&format!("expected [{crops}, {width}]")));
                }
                Ok(vec![1])
            }
        }
    }
}

/// Declarative layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Per-sample input shape: `[h, w, c]` for images, `[crops, width]` for the head.
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub init: &'static str,
}

/// Output sizes printed in the architecture tables, one per non-activation layer.
const TABLE1_SHAPES: [&[usize]; 8] = [
    &[28, 28, 32],
    &[14, 14, 32],
    &[14, 14, 64],
    &[7, 7, 64],
    &[3136],
    &[1024],
    &[128],
    &[1],
];
const SIMC_SHAPES: [&[usize]; 8] = [
    &[28, 28, 32],
    &[14, 14, 32],
    &[14, 14, 64],
    &[7, 7, 64],
    &[3136],
    &[100],
    &[10],
    &[1],
];

pub const HE_UNIFORM: &str = "he-uniform";

impl ModelConfig {
    /// A preset stack. For the two convolutional presets the first
    /// convolution's padding is chosen so its output is 28x28.
    pub fn preset(preset: Preset, input: &[usize]) -> Result<Self, NnError> {
        let conv_stack = |dense: [usize; 2]| -> Result<Vec<LayerSpec>, NnError> {
            let [h, w, _] = input else {
                return Err(NnError::Config(format!(
                    "{preset} expects an [h, w, c] input, got {input:?}"
                )));
            };
            if h != w || *h > 32 || *h < 24 || (32 - h) % 2 != 0 {
                return Err(NnError::Config(format!(
                    "{preset} needs a square input between 24 and 32 pixels of even slack, got {input:?}"
                )));
            }
            let pad = (28 + 4 - h) / 2;
            Ok(vec![
                LayerSpec::Conv2d {
                    filters: 32,
                    kernel: 5,
                    padding: pad,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { size: 2, stride: 2 },
                LayerSpec::Conv2d {
                    filters: 64,
                    kernel: 5,
                    padding: 2,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { size: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: dense[0] },
                LayerSpec::Relu,
                LayerSpec::Dense { units: dense[1] },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 1 },
            ])
        };
        let layers = match preset {
            Preset::Table1 => conv_stack([1024, 128])?,
            Preset::SimC => conv_stack([100, 10])?,
            Preset::IntegrateHead => vec![LayerSpec::CropIntegrate {
                crops: 5,
                width: 128,
                hidden: 32,
            }],
            Preset::Custom => return Err(NnError::Config("custom models need an explicit layer list".into())),
        };
        let cfg = Self {
            preset,
            input: input.to_vec(),
            layers,
            init: HE_UNIFORM,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn custom(input: &[usize], layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let cfg = Self {
            preset: Preset::Custom,
            input: input.to_vec(),
            layers,
            init: HE_UNIFORM,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Per-sample shape after each layer.
    pub fn output_shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shape = self.input.clone();
        if shape.is_empty() || shape.contains(&0) {
            return Err(NnError::Config(format!(
                "input shape {shape:?} must be nonempty and positive"
            )));
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            shape = spec.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    /// Checks shape propagation, the scalar output, and preset table sizes.
    pub fn validate(&self) -> Result<(), NnError> {
        let shapes = self.output_shapes()?;
        match shapes.last() {
            Some(s) if s.iter().product::<usize>() == 1 => {}
            other => {
                return Err(NnError::Config(format!(
                    "final output must be one scalar per sample, got {other:?}"
                )))
            }
        }
        let table: Option<&[&[usize]]> = match self.preset {
            Preset::Table1 => Some(&TABLE1_SHAPES),
            Preset::SimC => Some(&SIMC_SHAPES),
            _ => None,
        };
        if let Some(table) = table {
            let printed: Vec<&Vec<usize>> = self
                .layers
                .iter()
                .zip(&shapes)
                .filter(|(l, _)| !matches!(l, LayerSpec::Relu | LayerSpec::Sigmoid))
                .map(|(_, s)| s)
                .collect();
            let matches = printed.len() == table.len() && printed.iter().zip(table).all(|(a, b)| a.as_slice() == *b);
            if !matches {
                return Err(NnError::Config(format!(
                    "{} shapes {:?} differ from the architecture table",
                    self.preset, printed
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    MaxPool2d(MaxPool2d),
    Dense(Dense<T>),
    Flatten(Flatten),
    Relu(Relu),
    Sigmoid(Sigmoid<T>),
    CropIntegrate(CropIntegrate<T>),
}

impl<T: Real> Layer<T> {
    fn build(spec: &LayerSpec, input: &[usize], rng: &mut ChaCha8Rng) -> Self {
        match *spec {
            LayerSpec::Conv2d {
                filters,
                kernel,
                padding,
            } => Layer::Conv2d(Conv2d::new(input[2], filters, kernel, padding, rng)),
            LayerSpec::MaxPool2d { size, stride } => Layer::MaxPool2d(MaxPool2d::new(size, stride)),
            LayerSpec::Dense { units } => Layer::Dense(Dense::new(input[0], units, rng)),
            LayerSpec::Flatten => Layer::Flatten(Flatten::default()),
            LayerSpec::Relu => Layer::Relu(Relu::default()),
            LayerSpec::Sigmoid => Layer::Sigmoid(Sigmoid::default()),
            LayerSpec::CropIntegrate { crops, width, hidden } => {
                Layer::CropIntegrate(CropIntegrate::new(crops, width, hidden, rng))
            }
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::CropIntegrate(l) => vec![&l.shared, &l.shared_bias, &l.head, &l.head_bias],
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::CropIntegrate(l) => vec![&mut l.shared, &mut l.shared_bias, &mut l.head, &mut l.head_bias],
            _ => Vec::new(),
        }
    }

    fn apply(&self, x: Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv2d(l) => l.apply(&x),
            Layer::MaxPool2d(l) => l.apply(&x),
            Layer::Dense(l) => l.apply(&x),
            Layer::Flatten(l) => l.apply(x),
            Layer::Relu(l) => Ok(l.apply(x)),
            Layer::Sigmoid(l) => Ok(l.apply(x)),
            Layer::CropIntegrate(l) => l.apply(&x),
        }
    }

    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv2d(l) => l.forward(&x),
            Layer::MaxPool2d(l) => l.forward(&x),
            Layer::Dense(l) => l.forward(&x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::Sigmoid(l) => Ok(l.forward(x)),
            Layer::CropIntegrate(l) => l.forward(&x),
        }
    }

    fn backward(&mut self, dy: Tensor<T>, need_dx: bool, index: usize) -> Result<Option<Tensor<T>>, NnError> {
        match self {
            Layer::Conv2d(l) => l.backward(&dy, need_dx, index),
            Layer::MaxPool2d(l) => l.backward(&dy, index).map(Some),
            Layer::Dense(l) => l.backward(&dy, need_dx, index),
            Layer::Flatten(l) => l.backward(dy, index).map(Some),
            Layer::Relu(l) => l.backward(dy, index).map(Some),
            Layer::Sigmoid(l) => l.backward(dy, index).map(Some),
            Layer::CropIntegrate(l) => l.backward(&dy, need_dx, index),
        }
    }
}

/// A sequential network producing one log relative hazard per sample.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Model<T> {
    /// Builds and initializes a model; the same seed gives the same weights
    /// in either precision up to rounding.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        let shapes = config.output_shapes()?;
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut input = config.input.clone();
        let mut layers = Vec::with_capacity(config.layers.len());
        for (spec, out) in config.layers.iter().zip(&shapes) {
            layers.push(Layer::build(spec, &input, &mut rng));
            input = out.clone();
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.shape().len() != self.config.input.len() + 1 || x.shape()[1..] != self.config.input[..] {
            let mut expected = vec![x.batch()];
            expected.extend_from_slice(&self.config.input);
            return Err(NnError::Shape {
                context: "model input".into(),
                expected,
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Inference without caching; `[n, ...input]` to `n` outputs.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<T>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(h)?;
            if !h.all_finite() {
                return Err(NnError::NonFinite { layer: i });
            }
        }
        Ok(h.into_data())
    }

    /// Training forward pass; caches activations for `backward`.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Vec<T>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            h = layer.forward(h)?;
            if !h.all_finite() {
                return Err(NnError::NonFinite { layer: i });
            }
        }
        Ok(h.into_data())
    }

    /// Accumulates parameter gradients given `dL/df` for the cached batch.
    pub fn backward(&mut self, upstream: &[T]) -> Result<(), NnError> {
        let first_param = self.layers.iter().position(|l| !l.params().is_empty());
        let mut g = Tensor::from_vec(&[upstream.len(), 1], upstream.to_vec())?;
        for i in (0..self.layers.len()).rev() {
            let need_dx = first_param.is_some_and(|p| p < i);
            match self.layers[i].backward(g, need_dx, i)? {
                Some(dx) => {
                    if !dx.all_finite() {
                        return Err(NnError::NonFinite { layer: i });
                    }
                    g = dx;
                }
                None => break,
            }
        }
        if self.params().iter().any(|p| !p.grad.all_finite()) {
            return Err(NnError::NonFinite {
                layer: self.layers.len(),
            });
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(T::zero());
        }
    }

    /// `p <- p - lr * g` for every parameter.
    pub fn sgd_step(&mut self, lr: f64) -> Result<(), NnError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NnError::Config(format!("learning rate must be positive, got {lr}")));
        }
        let lr = T::from_f64(lr);
        for p in self.params_mut() {
            sgd_update(p.value.data_mut(), p.grad.data(), lr)?;
        }
        Ok(())
    }

    /// Parameters as `(shape, values)` pairs in f64.
    pub fn export(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        self.params()
            .iter()
            .map(|p| {
                (
                    p.value.shape().to_vec(),
                    p.value.data().iter().map(|v| v.as_f64()).collect(),
                )
            })
            .collect()
    }

    /// Inverse of `export`; shapes must match exactly.
    pub fn import(&mut self, tensors: &[(Vec<usize>, Vec<f64>)]) -> Result<(), NnError> {
        let mut params = self.params_mut();
        if params.len() != tensors.len() {
            return Err(NnError::Config(format!(
                "model has {} parameter tensors, got {}",
                params.len(),
                tensors.len()
            )));
        }
        for (p, (shape, data)) in params.iter_mut().zip(tensors) {
            if p.value.shape() != shape.as_slice() || data.len() != p.value.len() {
                return Err(NnError::Shape {
                    context: String::from("imported parameter"),
                    expected: p.value.shape().to_vec(),
                    got: shape.clone(),
                });
            }
            for (d, s) in p.value.data_mut().iter_mut().zip(data) {
                *d = T::from_f64(*s);
            }
        }
        Ok(())
    }

    /// Hash of the cached piecewise-linear routing (relu masks, pool and
    /// crop argmaxes). Two forwards with equal signatures lie on the same
    /// smooth piece.
    pub fn signature(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for l in &self.layers {
            match l {
                Layer::Relu(r) => r.signature(&mut h),
                Layer::MaxPool2d(p) => p.signature(&mut h),
                Layer::CropIntegrate(c) => c.signature(&mut h),
                _ => {}
            }
        }
        h
    }
}

/// In-place SGD update on one tensor.
pub(crate) fn sgd_update<T: Real>(p: &mut [T], g: &[T], lr: T) -> Result<(), NnError> {
    if p.len() != g.len() {
        return Err(NnError::Shape {
            context: "sgd step".into(),
            expected: vec![p.len()],
            got: vec![g.len()],
        });
    }
    for (v, d) in p.iter_mut().zip(g) {
        *v -= lr * *d;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_shapes() {
        let cfg = ModelConfig::preset(Preset::Table1, &[28, 28, 1]).unwrap();
        let shapes = cfg.output_shapes().unwrap();
        assert_eq!(shapes[0], vec![28, 28, 32]);
        assert_eq!(shapes[6], vec![3136]);
        assert_eq!(shapes.last().unwrap(), &vec![1]);
    }

    #[test]
    fn simc_pads_to_table_size() {
        for side in [28, 32] {
            let cfg = ModelConfig::preset(Preset::SimC, &[side, side, 3]).unwrap();
            assert_eq!(cfg.output_shapes().unwrap()[0], vec![28, 28, 32]);
        }
        assert!(ModelConfig::preset(Preset::SimC, &[30, 31, 3]).is_err());
    }

    #[test]
    fn non_scalar_output_rejected() {
        let err = ModelConfig::custom(&[4], vec![LayerSpec::Dense { units: 2 }]).unwrap_err();
        assert!(matches!(err, NnError::Config(_)));
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let cfg = ModelConfig::preset(Preset::Table1, &[28, 28, 1]).unwrap();
        let mut m = Model::<f32>::new(cfg, 0).unwrap();
        for p in m.params_mut() {
            p.value.fill(0.0);
        }
        let x = Tensor::from_vec(
            &[2, 28, 28, 1],
            (0..2 * 784).map(|i| (i % 255) as f32 / 255.0).collect(),
        )
        .unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn wrong_input_shape_lists_both() {
        let cfg = ModelConfig::preset(Preset::Table1, &[28, 28, 1]).unwrap();
        let m = Model::<f32>::new(cfg, 0).unwrap();
        let err = m.predict(&Tensor::zeros(&[1, 32, 32, 3])).unwrap_err();
        assert_eq!(
            err,
            NnError::Shape {
                context: "model input".into(),
                expected: vec![1, 28, 28, 1],
                got: vec![1, 32, 32, 3]
            }
        );
    }

    #[test]
    fn sgd_examples() {
        let mut p = [1.0f64];
        sgd_update(&mut p, &[0.5], 1.0).unwrap();
        assert_eq!(p, [0.5]);
        let mut q = [1.0f64];
        // gradient of p^2 / 2 is p
        let g = [q[0]];
        sgd_update(&mut q, &g, 0.1).unwrap();
        assert!((q[0] - 0.9).abs() < 1e-15);
        let mut r = [2.0f64, -3.0];
        sgd_update(&mut r, &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(r, [2.0, -3.0]);
        assert!(sgd_update(&mut r, &[0.0], 0.3).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let cfg = ModelConfig::custom(
            &[6, 6, 2],
            vec![
                LayerSpec::Conv2d {
                    filters: 3,
                    kernel: 3,
                    padding: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { size: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 1 },
            ],
        )
        .unwrap();
        let mut m = Model::<f64>::new(cfg, 5).unwrap();
        let x = Tensor::from_vec(&[3, 6, 6, 2], (0..216).map(|i| (i % 17) as f64 / 17.0).collect()).unwrap();
        m.forward(&x).unwrap();
        m.backward(&[0.0; 3]).unwrap();
        assert!(m.params().iter().all(|p| p.grad.data().iter().all(|g| *g == 0.0)));
        assert!(matches!(m.backward(&[0.0; 3]), Err(NnError::MissingCache { .. })));
    }

    #[test]
    fn forward_is_bit_deterministic_and_export_roundtrips() {
        let cfg = ModelConfig::preset(Preset::IntegrateHead, &[5, 128]).unwrap();
        let mut a = Model::<f64>::new(cfg.clone(), 9).unwrap();
        let x = Tensor::from_vec(&[2, 5, 128], (0..1280).map(|i| ((i * 31) % 97) as f64 / 97.0).collect()).unwrap();
        let y1 = a.forward(&x).unwrap();
        let y2 = a.predict(&x).unwrap();
        assert_eq!(y1, y2);
        let mut b = Model::<f64>::new(cfg, 10).unwrap();
        b.import(&a.export()).unwrap();
        assert_eq!(b.predict(&x).unwrap(), y1);
    }
}
