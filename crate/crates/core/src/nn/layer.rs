//! Layer descriptions and their forward/backward kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Square kernels, zero padding, with bias.
    Conv2D {
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        pad: usize,
    },
    ReLU,
    MaxPool {
        size: usize,
        stride: usize,
    },
    /// Flattens its input. Weights and bias.
    FullyConnected {
        out_dim: usize,
    },
    /// Inverted dropout: scaled by `1 / (1 - rate)` while training,
    /// identity in evaluation.
    Dropout {
        rate: f64,
    },
    /// Per-pixel weighted sum of all input channels into one channel, no
    /// bias. Channel 0 is the image, the rest are filter responses.
    Fusion1x1,
}

impl LayerSpec {
    /// Convolution, ReLU, 2x2 max pooling. The convolution preserves size.
    pub fn conv_block(out_channels: usize, kernel_size: usize) -> [LayerSpec; 3] {
        [
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                stride: 1,
                pad: kernel_size / 2,
            },
            LayerSpec::ReLU,
            LayerSpec::MaxPool { size: 2, stride: 2 },
        ]
    }

    /// Fully connected, ReLU, dropout.
    pub fn fc_block(out_dim: usize, drop_rate: f64) -> [LayerSpec; 3] {
        [
            LayerSpec::FullyConnected { out_dim },
            LayerSpec::ReLU,
            LayerSpec::Dropout { rate: drop_rate },
        ]
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                stride,
                ..
            } => {
                if out_channels == 0 || kernel_size == 0 || stride == 0 {
                    return Err("conv channels, kernel size and stride must be positive".into());
                }
            }
            LayerSpec::MaxPool { size, stride } => {
                if size == 0 || stride == 0 {
                    return Err("pool size and stride must be positive".into());
                }
            }
            LayerSpec::FullyConnected { out_dim } => {
                if out_dim == 0 {
                    return Err("fully connected output must be positive".into());
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(format!("dropout rate must be in [0, 1), got {rate}"));
                }
            }
            LayerSpec::ReLU | LayerSpec::Fusion1x1 => {}
        }
        Ok(())
    }

    pub fn output_shape(&self, input: Shape) -> std::result::Result<Shape, String> {
        self.validate()?;
        if input.is_empty() {
            return Err(format!("empty input {input}"));
        }
        match *self {
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                stride,
                pad,
            } => {
                let ph = input.height + 2 * pad;
                let pw = input.width + 2 * pad;
                if ph < kernel_size || pw < kernel_size {
                    return Err(format!("conv kernel {kernel_size} larger than padded input {input}"));
                }
                Ok(Shape::new(
                    (ph - kernel_size) / stride + 1,
                    (pw - kernel_size) / stride + 1,
                    out_channels,
                ))
            }
            LayerSpec::MaxPool { size, stride } => {
                if input.height < size || input.width < size {
                    return Err(format!("pool window {size} larger than input {input}"));
                }
                Ok(Shape::new(
                    (input.height - size) / stride + 1,
                    (input.width - size) / stride + 1,
                    input.channels,
                ))
            }
            LayerSpec::FullyConnected { out_dim } => Ok(Shape::flat(out_dim)),
            LayerSpec::ReLU | LayerSpec::Dropout { .. } => Ok(input),
            LayerSpec::Fusion1x1 => Ok(Shape::new(input.height, input.width, 1)),
        }
    }

    pub fn param_count(&self, input: Shape) -> usize {
        match *self {
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                ..
            } => kernel_size * kernel_size * input.channels * out_channels + out_channels,
            LayerSpec::FullyConnected { out_dim } => input.len() * out_dim + out_dim,
            LayerSpec::Fusion1x1 => input.channels,
            _ => 0,
        }
    }
}

/// A spec with its shapes resolved and parameters materialized.
///
/// Parameter layouts:
/// - Conv2D: weights `[ky][kx][in_c][out_c]`, then `out_c` biases.
/// - FullyConnected: weights `[in][out]`, then `out` biases.
/// - Fusion1x1: one weight per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) spec: LayerSpec,
    pub(crate) input: Shape,
    pub(crate) output: Shape,
    pub(crate) params: Vec<f64>,
}

/// Per-layer state saved by the forward pass for backward.
#[derive(Debug, Clone)]
pub(crate) enum Aux {
    None,
    /// Flat input index chosen by each pooled output.
    Argmax(Vec<u32>),
    /// Dropout multipliers (0 or `1 / (1 - rate)`).
    Mask(Vec<f64>),
}

impl Layer {
    pub(crate) fn new(spec: LayerSpec, input: Shape, index: usize, rng: &mut impl Rng) -> Result<Self> {
        let output = spec
            .output_shape(input)
            .map_err(|msg| Error::Layer { index, msg })?;
        let n = spec.param_count(input);
        let mut params = vec![0.0; n];
        match spec {
            LayerSpec::Conv2D {
                out_channels,
                kernel_size,
                ..
            } => {
                let fan_in = kernel_size * kernel_size * input.channels;
                let limit = (6.0 / fan_in as f64).sqrt();
                let nw = n - out_channels;
                for p in &mut params[..nw] {
                    *p = rng.random_range(-limit..limit);
                }
            }
            LayerSpec::FullyConnected { out_dim } => {
                let limit = (6.0 / input.len() as f64).sqrt();
                let nw = n - out_dim;
                for p in &mut params[..nw] {
                    *p = rng.random_range(-limit..limit);
                }
            }
            LayerSpec::Fusion1x1 => {
                // image weight 1, each response 1 / Nf
                params[0] = 1.0;
                let nf = input.channels - 1;
                for p in &mut params[1..] {
                    *p = 1.0 / nf as f64;
                }
            }
            _ => {}
        }
        Ok(Self {
            spec,
            input,
            output,
            params,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// `mask` is consulted only by dropout layers.
    pub(crate) fn forward(&self, x: &Tensor, mask: Option<Vec<f64>>) -> (Tensor, Aux) {
        let xd = x.data();
        match self.spec {
            LayerSpec::Conv2D {
                out_channels: oc,
                kernel_size: k,
                stride,
                pad,
            } => (
                Tensor::new(self.output, self.conv_forward(xd, oc, k, stride, pad)).expect("shape"),
                Aux::None,
            ),
            LayerSpec::ReLU => (
                Tensor::new(self.output, xd.iter().map(|&v| v.max(0.0)).collect()).expect("shape"),
                Aux::None,
            ),
            LayerSpec::MaxPool { size, stride } => {
                let (out, arg) = self.pool_forward(xd, size, stride);
                (Tensor::new(self.output, out).expect("shape"), Aux::Argmax(arg))
            }
            LayerSpec::FullyConnected { out_dim } => {
                let n_in = self.input.len();
                let (w, b) = self.params.split_at(n_in * out_dim);
                let mut out = b.to_vec();
                for (i, &v) in xd.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let row = &w[i * out_dim..(i + 1) * out_dim];
                    for (o, &wv) in out.iter_mut().zip(row) {
                        *o += v * wv;
                    }
                }
                (Tensor::new(self.output, out).expect("shape"), Aux::None)
            }
            LayerSpec::Dropout { .. } => match mask {
                Some(m) => {
                    let out = xd.iter().zip(&m).map(|(v, s)| v * s).collect();
                    (Tensor::new(self.output, out).expect("shape"), Aux::Mask(m))
                }
                None => (x.clone(), Aux::None),
            },
            LayerSpec::Fusion1x1 => {
                let c = self.input.channels;
                let out = xd
                    .chunks_exact(c)
                    .map(|px| {
                        let mut acc = 0.0;
                        for (v, w) in px.iter().zip(&self.params) {
                            acc += w * v;
                        }
                        acc
                    })
                    .collect();
                (Tensor::new(self.output, out).expect("shape"), Aux::None)
            }
        }
    }

    fn conv_forward(&self, x: &[f64], oc: usize, k: usize, stride: usize, pad: usize) -> Vec<f64> {
        let Shape {
            height: ih,
            width: iw,
            channels: ic,
        } = self.input;
        let (oh, ow) = (self.output.height, self.output.width);
        let (w, b) = self.params.split_at(k * k * ic * oc);
        let mut out = vec![0.0; oh * ow * oc];
        for oy in 0..oh {
            for ox in 0..ow {
                let o = &mut out[(oy * ow + ox) * oc..(oy * ow + ox + 1) * oc];
                o.copy_from_slice(b);
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= ih {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix as usize >= iw {
                            continue;
                        }
                        let base = (iy as usize * iw + ix as usize) * ic;
                        let wbase = (ky * k + kx) * ic * oc;
                        for ci in 0..ic {
                            let v = x[base + ci];
                            if v == 0.0 {
                                continue;
                            }
                            let wr = &w[wbase + ci * oc..wbase + (ci + 1) * oc];
                            for (ov, &wv) in o.iter_mut().zip(wr) {
                                *ov += v * wv;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn pool_forward(&self, x: &[f64], size: usize, stride: usize) -> (Vec<f64>, Vec<u32>) {
        let Shape {
            width: iw,
            channels: c,
            ..
        } = self.input;
        let (oh, ow) = (self.output.height, self.output.width);
        let mut out = Vec::with_capacity(oh * ow * c);
        let mut arg = Vec::with_capacity(oh * ow * c);
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0usize;
                    for py in 0..size {
                        for px in 0..size {
                            let i = ((oy * stride + py) * iw + ox * stride + px) * c + ch;
                            // strict comparison: ties keep the first position
                            if x[i] > best {
                                best = x[i];
                                best_i = i;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_i as u32);
                }
            }
        }
        (out, arg)
    }

    /// Accumulate parameter gradients into `grad_params` and return the
    /// gradient with respect to this layer's input.
    pub(crate) fn backward(&self, x: &Tensor, aux: &Aux, g: &Tensor, grad_params: &mut [f64]) -> Tensor {
        let xd = x.data();
        let gd = g.data();
        let mut gin = vec![0.0; self.input.len()];
        match self.spec {
            LayerSpec::Conv2D {
                out_channels: oc,
                kernel_size: k,
                stride,
                pad,
            } => self.conv_backward(xd, gd, oc, k, stride, pad, grad_params, &mut gin),
            LayerSpec::ReLU => {
                for ((gi, &xv), &gv) in gin.iter_mut().zip(xd).zip(gd) {
                    if xv > 0.0 {
                        *gi = gv;
                    }
                }
            }
            LayerSpec::MaxPool { .. } => {
                if let Aux::Argmax(arg) = aux {
                    for (&i, &gv) in arg.iter().zip(gd) {
                        gin[i as usize] += gv;
                    }
                }
            }
            LayerSpec::FullyConnected { out_dim } => {
                let n_in = self.input.len();
                let (w, _) = self.params.split_at(n_in * out_dim);
                let (gw, gb) = grad_params.split_at_mut(n_in * out_dim);
                for (b, &gv) in gb.iter_mut().zip(gd) {
                    *b += gv;
                }
                for (i, &v) in xd.iter().enumerate() {
                    let row = &w[i * out_dim..(i + 1) * out_dim];
                    let grow = &mut gw[i * out_dim..(i + 1) * out_dim];
                    let mut acc = 0.0;
                    for ((gwv, &wv), &gv) in grow.iter_mut().zip(row).zip(gd) {
                        *gwv += v * gv;
                        acc += wv * gv;
                    }
                    gin[i] = acc;
                }
            }
            LayerSpec::Dropout { .. } => match aux {
                Aux::Mask(m) => {
                    for ((gi, &gv), &s) in gin.iter_mut().zip(gd).zip(m) {
                        *gi = gv * s;
                    }
                }
                _ => gin.copy_from_slice(gd),
            },
            LayerSpec::Fusion1x1 => {
                let c = self.input.channels;
                for ((px, gpx), &gv) in xd.chunks_exact(c).zip(gin.chunks_exact_mut(c)).zip(gd) {
                    for ch in 0..c {
                        grad_params[ch] += gv * px[ch];
                        gpx[ch] = self.params[ch] * gv;
                    }
                }
            }
        }
        Tensor::new(self.input, gin).expect("shape")
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &self,
        x: &[f64],
        g: &[f64],
        oc: usize,
        k: usize,
        stride: usize,
        pad: usize,
        grad_params: &mut [f64],
        gin: &mut [f64],
    ) {
        let Shape {
            height: ih,
            width: iw,
            channels: ic,
        } = self.input;
        let (oh, ow) = (self.output.height, self.output.width);
        let nw = k * k * ic * oc;
        let w = &self.params[..nw];
        let (gw, gb) = grad_params.split_at_mut(nw);
        for oy in 0..oh {
            for ox in 0..ow {
                let go = &g[(oy * ow + ox) * oc..(oy * ow + ox + 1) * oc];
                for (b, &gv) in gb.iter_mut().zip(go) {
                    *b += gv;
                }
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= ih {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix as usize >= iw {
                            continue;
                        }
                        let base = (iy as usize * iw + ix as usize) * ic;
                        let wbase = (ky * k + kx) * ic * oc;
                        for ci in 0..ic {
                            let v = x[base + ci];
                            let wr = &w[wbase + ci * oc..wbase + (ci + 1) * oc];
                            let gwr = &mut gw[wbase + ci * oc..wbase + (ci + 1) * oc];
                            let mut acc = 0.0;
                            for ((gwv, &wv), &gv) in gwr.iter_mut().zip(wr).zip(go) {
                                *gwv += v * gv;
                                acc += wv * gv;
                            }
                            gin[base + ci] += acc;
                        }
                    }
                }
            }
        }
    }
}
