//! Layers with hand-written forward and backward passes.
//!
//! Image tensors are NHWC. `forward` caches whatever `backward` needs;
//! `apply` is the cache-free inference path. Parameter gradients accumulate
//! across `backward` calls until zeroed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::real::gemm;
use super::{Real, Tensor};
use crate::error::NnError;

fn shape_err(context: &str, expected: &[usize], got: &[usize]) -> NnError {
    NnError::Shape {
        context: context.into(),
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}

/// He-style uniform init: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub(crate) fn he_uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = num_traits::Float::sqrt(6.0 / fan_in as f64);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

/// A trainable weight with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }
}

// ---------------------------------------------------------------- conv2d

/// Stride-1 square convolution with symmetric zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub padding: usize,
    /// `[filters, kernel * kernel * in_channels]`, patch order `(ky, kx, c)`.
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<ConvCache<T>>,
    workspace: Vec<T>,
}

#[derive(Debug, Clone)]
struct ConvCache<T> {
    cols: Vec<T>,
    in_shape: [usize; 4],
    out_hw: (usize, usize),
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let q = kernel * kernel * in_channels;
        Self {
            in_channels,
            filters,
            kernel,
            padding,
            weight: Param::new(he_uniform(&[filters, q], q, rng)),
            bias: Param::zeros(&[filters]),
            cache: None,
            workspace: Vec::new(),
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let oh = (h + 2 * self.padding).checked_sub(self.kernel)? + 1;
        let ow = (w + 2 * self.padding).checked_sub(self.kernel)? + 1;
        Some((oh, ow))
    }

    fn dims(&self, x: &Tensor<T>) -> Result<([usize; 4], (usize, usize)), NnError> {
        let s = x.shape();
        if s.len() != 4 || s[3] != self.in_channels {
            return Err(shape_err("conv2d input [n, h, w, c]", &[0, 0, 0, self.in_channels], s));
        }
        let out = self
            .output_hw(s[1], s[2])
            .ok_or_else(|| NnError::Config(format!("kernel {} larger than padded input {:?}", self.kernel, s)))?;
        Ok(([s[0], s[1], s[2], s[3]], out))
    }

    /// Writes every entry of `cols`, zeros included, so the buffer can be reused.
    fn im2col_into(&self, x: &[T], [n, h, w, c]: [usize; 4], (oh, ow): (usize, usize), cols: &mut Vec<T>) {
        let k = self.kernel;
        let pad = self.padding as isize;
        let q = k * k * c;
        cols.resize(n * oh * ow * q, T::zero());
        let mut p = 0;
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &mut cols[p * q..(p + 1) * q];
                    let kx_lo = ((pad - ox as isize).max(0) as usize).min(k);
                    let kx_hi = ((w as isize + pad - ox as isize).min(k as isize)).max(kx_lo as isize) as usize;
                    for ky in 0..k {
                        let seg = &mut row[ky * k * c..(ky + 1) * k * c];
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize || kx_lo == kx_hi {
                            seg.fill(T::zero());
                            continue;
                        }
                        let ix0 = (ox + kx_lo) as isize - pad;
                        let src = ((b * h + iy as usize) * w + ix0 as usize) * c;
                        seg[..kx_lo * c].fill(T::zero());
                        seg[kx_lo * c..kx_hi * c].copy_from_slice(&x[src..src + (kx_hi - kx_lo) * c]);
                        seg[kx_hi * c..].fill(T::zero());
                    }
                    p += 1;
                }
            }
        }
    }

    fn col2im(&self, dcols: &[T], [n, h, w, c]: [usize; 4], (oh, ow): (usize, usize)) -> Vec<T> {
        let k = self.kernel;
        let pad = self.padding as isize;
        let q = k * k * c;
        let mut dx = vec![T::zero(); n * h * w * c];
        let mut p = 0;
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &dcols[p * q..(p + 1) * q];
                    let kx_lo = (pad - ox as isize).max(0) as usize;
                    let kx_hi = ((w as isize + pad - ox as isize).min(k as isize)).max(0) as usize;
                    for ky in 0..k {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize || kx_lo >= kx_hi {
                            continue;
                        }
                        let ix0 = (ox + kx_lo) as isize - pad;
                        let dst = ((b * h + iy as usize) * w + ix0 as usize) * c;
                        let len = (kx_hi - kx_lo) * c;
                        let src = (ky * k + kx_lo) * c;
                        for (d, s) in dx[dst..dst + len].iter_mut().zip(&row[src..src + len]) {
                            *d += *s;
                        }
                    }
                    p += 1;
                }
            }
        }
        dx
    }

    fn run(&self, x: &Tensor<T>, mut cols: Vec<T>) -> Result<(Tensor<T>, ConvCache<T>), NnError> {
        let (in_shape, (oh, ow)) = self.dims(x)?;
        self.im2col_into(x.data(), in_shape, (oh, ow), &mut cols);
        let rows = in_shape[0] * oh * ow;
        let q = self.kernel * self.kernel * self.in_channels;
        let mut out = Vec::with_capacity(rows * self.filters);
        for _ in 0..rows {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            false,
            true,
            rows,
            self.filters,
            q,
            &cols,
            self.weight.value.data(),
            T::one(),
            &mut out,
        );
        let y = Tensor::from_vec(&[in_shape[0], oh, ow, self.filters], out)?;
        Ok((
            y,
            ConvCache {
                cols,
                in_shape,
                out_hw: (oh, ow),
            },
        ))
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.run(x, Vec::new())?.0)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        // Reuse the patch buffer: fresh allocations of this size are mostly
        // page faults.
        let buf = match self.cache.take() {
            Some(c) => c.cols,
            None => core::mem::take(&mut self.workspace),
        };
        let (y, cache) = self.run(x, buf)?;
        self.cache = Some(cache);
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, need_dx: bool, layer: usize) -> Result<Option<Tensor<T>>, NnError> {
        let cache = self.cache.take().ok_or(NnError::MissingCache { layer })?;
        let (oh, ow) = cache.out_hw;
        let rows = cache.in_shape[0] * oh * ow;
        let q = self.kernel * self.kernel * self.in_channels;
        let f = self.filters;
        if dy.len() != rows * f {
            return Err(shape_err(
                "conv2d upstream",
                &[cache.in_shape[0], oh, ow, f],
                dy.shape(),
            ));
        }
        let g = dy.data();
        gemm(
            true,
            false,
            f,
            q,
            rows,
            g,
            &cache.cols,
            T::one(),
            self.weight.grad.data_mut(),
        );
        let db = self.bias.grad.data_mut();
        for r in 0..rows {
            for (d, v) in db.iter_mut().zip(&g[r * f..(r + 1) * f]) {
                *d += *v;
            }
        }
        let mut dcols = cache.cols;
        let dx = if need_dx {
            gemm(
                false,
                false,
                rows,
                q,
                f,
                g,
                self.weight.value.data(),
                T::zero(),
                &mut dcols,
            );
            Some(Tensor::from_vec(
                &cache.in_shape,
                self.col2im(&dcols, cache.in_shape, cache.out_hw),
            )?)
        } else {
            None
        };
        self.workspace = dcols;
        Ok(dx)
    }
}

// ------------------------------------------------------------- maxpool2d

/// Max pooling over square windows; ties go to the first element scanned.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub size: usize,
    pub stride: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(size: usize, stride: usize) -> Self {
        Self {
            size,
            stride,
            cache: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if h < self.size || w < self.size {
            return None;
        }
        Some(((h - self.size) / self.stride + 1, (w - self.size) / self.stride + 1))
    }

    fn run<T: Real>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), NnError> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(shape_err("maxpool2d input [n, h, w, c]", &[0, 0, 0, 0], s));
        }
        let (n, h, w, c) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = self
            .output_hw(h, w)
            .ok_or_else(|| NnError::Config(format!("pool window {} larger than input {:?}", self.size, s)))?;
        let xd = x.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut argmax = Vec::with_capacity(n * oh * ow * c);
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let corner = ((b * h + oy * self.stride) * w + ox * self.stride) * c;
                    let start = out.len();
                    out.extend_from_slice(&xd[corner..corner + c]);
                    argmax.extend(corner..corner + c);
                    let (best_v, best) = (&mut out[start..], &mut argmax[start..]);
                    for dy in 0..self.size {
                        for dx in 0..self.size {
                            let base = corner + (dy * w + dx) * c;
                            for ch in 0..c {
                                if xd[base + ch] > best_v[ch] {
                                    best_v[ch] = xd[base + ch];
                                    best[ch] = base + ch;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((Tensor::from_vec(&[n, oh, ow, c], out)?, argmax))
    }

    pub fn apply<T: Real>(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.run(x)?.0)
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (y, argmax) = self.run(x)?;
        self.cache = Some(PoolCache {
            argmax,
            in_shape: x.shape().to_vec(),
        });
        Ok(y)
    }

    pub fn backward<T: Real>(&mut self, dy: &Tensor<T>, layer: usize) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.take().ok_or(NnError::MissingCache { layer })?;
        if dy.len() != cache.argmax.len() {
            return Err(shape_err("maxpool2d upstream", &[cache.argmax.len()], dy.shape()));
        }
        let mut dx = Tensor::zeros(&cache.in_shape);
        let d = dx.data_mut();
        for (g, &i) in dy.data().iter().zip(&cache.argmax) {
            d[i] += *g;
        }
        Ok(dx)
    }

    pub(crate) fn signature(&self, h: &mut u64) {
        if let Some(c) = &self.cache {
            for &i in &c.argmax {
                mix(h, i as u64);
            }
        }
    }
}

// ----------------------------------------------------------------- dense

/// Fully connected layer `y = x W^T + b` on `[n, in]` inputs.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub inputs: usize,
    pub units: usize,
    /// `[units, inputs]`.
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, units: usize, rng: &mut R) -> Self {
        Self {
            inputs,
            units,
            weight: Param::new(he_uniform(&[units, inputs], inputs, rng)),
            bias: Param::zeros(&[units]),
            cache: None,
        }
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.inputs {
            return Err(shape_err(
                "dense input [n, in]",
                &[s.first().copied().unwrap_or(0), self.inputs],
                s,
            ));
        }
        let n = s[0];
        let mut out = Vec::with_capacity(n * self.units);
        for _ in 0..n {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            false,
            true,
            n,
            self.units,
            self.inputs,
            x.data(),
            self.weight.value.data(),
            T::one(),
            &mut out,
        );
        Tensor::from_vec(&[n, self.units], out)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let y = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, need_dx: bool, layer: usize) -> Result<Option<Tensor<T>>, NnError> {
        let x = self.cache.take().ok_or(NnError::MissingCache { layer })?;
        let n = x.batch();
        if dy.shape() != [n, self.units] {
            return Err(shape_err("dense upstream", &[n, self.units], dy.shape()));
        }
        let g = dy.data();
        gemm(
            true,
            false,
            self.units,
            self.inputs,
            n,
            g,
            x.data(),
            T::one(),
            self.weight.grad.data_mut(),
        );
        let db = self.bias.grad.data_mut();
        for r in 0..n {
            for (d, v) in db.iter_mut().zip(&g[r * self.units..(r + 1) * self.units]) {
                *d += *v;
            }
        }
        if !need_dx {
            return Ok(None);
        }
        let mut dx = vec![T::zero(); n * self.inputs];
        gemm(
            false,
            false,
            n,
            self.inputs,
            self.units,
            g,
            self.weight.value.data(),
            T::zero(),
            &mut dx,
        );
        Ok(Some(Tensor::from_vec(&[n, self.inputs], dx)?))
    }
}

// ---------------------------------------------------------- activations

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn apply<T: Real>(&self, mut x: Tensor<T>) -> Tensor<T> {
        x.data_mut().iter_mut().for_each(|v| {
            if *v <= T::zero() {
                *v = T::zero();
            }
        });
        x
    }

    pub fn forward<T: Real>(&mut self, mut x: Tensor<T>) -> Tensor<T> {
        let mask: Vec<bool> = x.data().iter().map(|v| *v > T::zero()).collect();
        for (v, on) in x.data_mut().iter_mut().zip(&mask) {
            if !on {
                *v = T::zero();
            }
        }
        self.mask = Some(mask);
        x
    }

    pub fn backward<T: Real>(&mut self, mut dy: Tensor<T>, layer: usize) -> Result<Tensor<T>, NnError> {
        let mask = self.mask.take().ok_or(NnError::MissingCache { layer })?;
        if mask.len() != dy.len() {
            return Err(shape_err("relu upstream", &[mask.len()], dy.shape()));
        }
        for (g, on) in dy.data_mut().iter_mut().zip(mask) {
            if !on {
                *g = T::zero();
            }
        }
        Ok(dy)
    }

    pub(crate) fn signature(&self, h: &mut u64) {
        if let Some(m) = &self.mask {
            for chunk in m.chunks(64) {
                let bits = chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, b)| acc | ((*b as u64) << i));
                mix(h, bits);
            }
        }
    }
}

/// Elementwise logistic function.
#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T> {
    out: Option<Tensor<T>>,
}

impl<T: Real> Sigmoid<T> {
    fn logistic(v: T) -> T {
        T::from_f64(crate::survival::sigmoid(v.as_f64()))
    }

    pub fn apply(&self, mut x: Tensor<T>) -> Tensor<T> {
        x.data_mut().iter_mut().for_each(|v| *v = Self::logistic(*v));
        x
    }

    pub fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let y = self.apply(x);
        self.out = Some(y.clone());
        y
    }

    pub fn backward(&mut self, mut dy: Tensor<T>, layer: usize) -> Result<Tensor<T>, NnError> {
        let y = self.out.take().ok_or(NnError::MissingCache { layer })?;
        if y.len() != dy.len() {
            return Err(shape_err("sigmoid upstream", y.shape(), dy.shape()));
        }
        for (g, s) in dy.data_mut().iter_mut().zip(y.data()) {
            *g *= *s * (T::one() - *s);
        }
        Ok(dy)
    }
}

/// Collapses everything after the batch axis.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    in_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn apply<T: Real>(&self, x: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (n, r) = (x.batch(), x.row_len());
        x.reshape(&[n, r])
    }

    pub fn forward<T: Real>(&mut self, x: Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.in_shape = Some(x.shape().to_vec());
        self.apply(x)
    }

    pub fn backward<T: Real>(&mut self, dy: Tensor<T>, layer: usize) -> Result<Tensor<T>, NnError> {
        let shape = self.in_shape.take().ok_or(NnError::MissingCache { layer })?;
        dy.reshape(&shape)
    }
}

// -------------------------------------------------------- crop integrate

/// Integration head over a fixed number of per-crop feature vectors.
///
/// A dense layer shared by all crops maps each `width`-vector to `hidden`
/// units; each crop keeps its largest unit; a final dense layer maps the
/// `crops`-vector to one output.
#[derive(Debug, Clone)]
pub struct CropIntegrate<T> {
    pub crops: usize,
    pub width: usize,
    pub hidden: usize,
    /// `[hidden, width]`, shared across crops.
    pub shared: Param<T>,
    pub shared_bias: Param<T>,
    /// `[1, crops]`.
    pub head: Param<T>,
    pub head_bias: Param<T>,
    cache: Option<CropCache<T>>,
}

type CropPass<T> = (Tensor<T>, Vec<T>, Vec<usize>);

#[derive(Debug, Clone)]
struct CropCache<T> {
    input: Tensor<T>,
    pooled: Vec<T>,
    argmax: Vec<usize>,
}

impl<T: Real> CropIntegrate<T> {
    pub fn new<R: Rng + ?Sized>(crops: usize, width: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            crops,
            width,
            hidden,
            shared: Param::new(he_uniform(&[hidden, width], width, rng)),
            shared_bias: Param::zeros(&[hidden]),
            head: Param::new(he_uniform(&[1, crops], crops, rng)),
            head_bias: Param::zeros(&[1]),
            cache: None,
        }
    }

    /// Per-sample shapes through the head: input, shared dense, max, output.
    pub fn stage_shapes(&self) -> [[usize; 2]; 4] {
        [
            [self.width, self.crops],
            [self.hidden, self.crops],
            [1, self.crops],
            [1, 1],
        ]
    }

    /// Output, per-crop pooled activations and their argmax units.
    fn run(&self, x: &Tensor<T>) -> Result<CropPass<T>, NnError> {
        if x.row_len() != self.crops * self.width || x.shape().len() < 2 {
            return Err(NnError::Config(format!(
                "crop-integrate expects {} crops of width {}, got input shape {:?}",
                self.crops,
                self.width,
                x.shape()
            )));
        }
        let n = x.batch();
        let rows = n * self.crops;
        let mut hidden = Vec::with_capacity(rows * self.hidden);
        for _ in 0..rows {
            hidden.extend_from_slice(self.shared_bias.value.data());
        }
        gemm(
            false,
            true,
            rows,
            self.hidden,
            self.width,
            x.data(),
            self.shared.value.data(),
            T::one(),
            &mut hidden,
        );
        let mut pooled = Vec::with_capacity(rows);
        let mut argmax = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &hidden[r * self.hidden..(r + 1) * self.hidden];
            let mut best = 0;
            for (u, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = u;
                }
            }
            pooled.push(row[best]);
            argmax.push(best);
        }
        let mut out = vec![self.head_bias.value.data()[0]; n];
        gemm(
            false,
            true,
            n,
            1,
            self.crops,
            &pooled,
            self.head.value.data(),
            T::one(),
            &mut out,
        );
        Ok((Tensor::from_vec(&[n, 1], out)?, pooled, argmax))
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.run(x)?.0)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (y, pooled, argmax) = self.run(x)?;
        self.cache = Some(CropCache {
            input: x.clone(),
            pooled,
            argmax,
        });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, need_dx: bool, layer: usize) -> Result<Option<Tensor<T>>, NnError> {
        let cache = self.cache.take().ok_or(NnError::MissingCache { layer })?;
        let n = cache.input.batch();
        if dy.len() != n {
            return Err(shape_err("crop-integrate upstream", &[n, 1], dy.shape()));
        }
        let g = dy.data();
        let rows = n * self.crops;
        gemm(
            true,
            false,
            1,
            self.crops,
            n,
            g,
            &cache.pooled,
            T::one(),
            self.head.grad.data_mut(),
        );
        self.head_bias.grad.data_mut()[0] += g.iter().fold(T::zero(), |a, b| a + *b);

        let w2 = self.head.value.data();
        let mut dhidden = vec![T::zero(); rows * self.hidden];
        for (b, gb) in g.iter().enumerate() {
            for (k, wk) in w2.iter().enumerate() {
                let r = b * self.crops + k;
                dhidden[r * self.hidden + cache.argmax[r]] = *gb * *wk;
            }
        }
        gemm(
            true,
            false,
            self.hidden,
            self.width,
            rows,
            &dhidden,
            cache.input.data(),
            T::one(),
            self.shared.grad.data_mut(),
        );
        let db = self.shared_bias.grad.data_mut();
        for r in 0..rows {
            db[cache.argmax[r]] += dhidden[r * self.hidden + cache.argmax[r]];
        }
        if !need_dx {
            return Ok(None);
        }
        let mut dx = vec![T::zero(); rows * self.width];
        gemm(
            false,
            false,
            rows,
            self.width,
            self.hidden,
            &dhidden,
            self.shared.value.data(),
            T::zero(),
            &mut dx,
        );
        Ok(Some(Tensor::from_vec(cache.input.shape(), dx)?))
    }

    pub(crate) fn signature(&self, h: &mut u64) {
        if let Some(c) = &self.cache {
            for &i in &c.argmax {
                mix(h, i as u64);
            }
        }
    }
}

fn mix(h: &mut u64, v: u64) {
    // FNV-1a over the value's bytes.
    for byte in v.to_le_bytes() {
        *h ^= byte as u64;
        *h = h.wrapping_mul(0x100_0000_01b3);
    }
}
