//! Feeding Gabor responses to a network: as a stacked `(Nf + 1)`-channel
//! tensor, or fused into one image `w_i * I + sum_k w_k * F_k`.
//!
//! Fusion is a 1x1 convolution over the stacked tensor with no bias; the
//! [`crate::nn::LayerSpec::Fusion1x1`] layer computes the same sum with the
//! same accumulation order.

use crate::convolve::ResponseStack;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    image: f64,
    responses: Vec<f64>,
}

impl FusionWeights {
    pub fn new(image: f64, responses: Vec<f64>) -> Result<Self> {
        if !image.is_finite() || responses.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("fusion weights".into()));
        }
        Ok(Self { image, responses })
    }

    /// `w_i = 1`, `w_k = 1 / Nf`.
    pub fn initial(nf: usize) -> Self {
        Self {
            image: 1.0,
            responses: vec![1.0 / nf.max(1) as f64; nf],
        }
    }

    /// From `[w_i, w_1, ..., w_Nf]`.
    pub fn from_slice(w: &[f64]) -> Result<Self> {
        let (&image, rest) = w
            .split_first()
            .ok_or_else(|| Error::Empty("fusion weights".into()))?;
        Self::new(image, rest.to_vec())
    }

    pub fn image(&self) -> f64 {
        self.image
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// `[w_i, w_1, ..., w_Nf]`, the 1x1 convolution coefficients.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.responses.len() + 1);
        v.push(self.image);
        v.extend_from_slice(&self.responses);
        v
    }

    pub fn channels(&self) -> usize {
        self.responses.len() + 1
    }
}

/// Channel 0 is the image, channel `k` the response `k - 1`.
pub fn stack(image: &Image, responses: &ResponseStack) -> Result<Tensor> {
    let (h, w) = (image.height(), image.width());
    if !responses.is_empty() && (responses.height() != h || responses.width() != w) {
        return Err(Error::Shape(format!(
            "image {h}x{w} vs responses {}x{}",
            responses.height(),
            responses.width()
        )));
    }
    let c = responses.len() + 1;
    let mut data = Vec::with_capacity(h * w * c);
    for (i, &p) in image.pixels().iter().enumerate() {
        data.push(p);
        for ch in responses.channels() {
            data.push(ch.pixels()[i]);
        }
    }
    Tensor::new(Shape::new(h, w, c), data)
}

fn check(t: &Tensor, w: &FusionWeights) -> Result<()> {
    if t.shape().channels != w.channels() {
        return Err(Error::Shape(format!(
            "tensor has {} channels, weights cover {}",
            t.shape().channels,
            w.channels()
        )));
    }
    if t.is_empty() {
        return Err(Error::Empty("fusion input".into()));
    }
    Ok(())
}

/// Per-pixel weighted sum of all channels.
pub fn fuse(t: &Tensor, w: &FusionWeights) -> Result<Image> {
    check(t, w)?;
    let coeffs = w.to_vec();
    let px = t
        .data()
        .chunks_exact(coeffs.len())
        .map(|v| {
            let mut acc = 0.0;
            for (c, x) in coeffs.iter().zip(v) {
                acc += c * x;
            }
            acc
        })
        .collect();
    Image::new(t.shape().height, t.shape().width, px)
}

/// Gradients of a scalar loss through [`fuse`], given `d loss / d fused`.
pub fn fuse_backward(t: &Tensor, w: &FusionWeights, grad_out: &Image) -> Result<(FusionWeights, Tensor)> {
    check(t, w)?;
    let s = t.shape();
    if grad_out.height() != s.height || grad_out.width() != s.width {
        return Err(Error::Shape(format!(
            "gradient {}x{} vs tensor {s}",
            grad_out.height(),
            grad_out.width()
        )));
    }
    let coeffs = w.to_vec();
    let c = coeffs.len();
    let mut gw = vec![0.0; c];
    let mut gt = Vec::with_capacity(t.len());
    for (v, &g) in t.data().chunks_exact(c).zip(grad_out.pixels()) {
        for ch in 0..c {
            gw[ch] += g * v[ch];
            gt.push(coeffs[ch] * g);
        }
    }
    Ok((FusionWeights::from_slice(&gw)?, Tensor::new(s, gt)?))
}
