//! Same-size 2-D correlation of single-channel images with odd kernels.
//!
//! The kernel is not flipped: `out[y][x] = sum K[ky][kx] * I[y + ky - r][x + kx - r]`
//! where `r` is the kernel radius and out-of-image reads follow [`BorderMode`].

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{FilterBank, Kernel};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BorderMode {
    /// Reads outside the image return 0.
    Zero,
    /// Reads outside the image return the nearest edge pixel.
    #[default]
    Replicate,
}

impl FromStr for BorderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(BorderMode::Zero),
            "replicate" => Ok(BorderMode::Replicate),
            other => Err(Error::InvalidParam(format!("unknown border mode '{other}'"))),
        }
    }
}

fn pad(image: &Image, r: usize, border: BorderMode) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut out = vec![0.0; ph * pw];
    for py in 0..ph {
        let sy = py as isize - r as isize;
        let row = &mut out[py * pw..(py + 1) * pw];
        match border {
            BorderMode::Zero => {
                if sy >= 0 && (sy as usize) < h {
                    let src = &image.pixels()[sy as usize * w..(sy as usize + 1) * w];
                    row[r..r + w].copy_from_slice(src);
                }
            }
            BorderMode::Replicate => {
                for (px, v) in row.iter_mut().enumerate() {
                    *v = image.at_clamped(sy, px as isize - r as isize);
                }
            }
        }
    }
    out
}

/// Same-size correlation. A [`Kernel`] is always square and odd, so the
/// padded extent (`dim + 2 * radius`) always covers it.
pub fn convolve2d(image: &Image, kernel: &Kernel, border: BorderMode) -> Image {
    let (h, w) = (image.height(), image.width());
    let k = kernel.size();
    let r = kernel.radius();
    let padded = pad(image, r, border);
    let pw = w + 2 * r;
    let kv = kernel.values();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k {
                let prow = &padded[(y + ky) * pw + x..(y + ky) * pw + x + k];
                let krow = &kv[ky * k..(ky + 1) * k];
                for (a, b) in krow.iter().zip(prow) {
                    acc += a * b;
                }
            }
            out[y * w + x] = acc;
        }
    }
    Image::from_parts(h, w, out)
}

/// Bank responses, one channel per kernel, in bank order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseStack {
    height: usize,
    width: usize,
    channels: Vec<Image>,
}

impl ResponseStack {
    /// An empty stack for a given image size.
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            channels: Vec::new(),
        }
    }

    pub fn from_channels(channels: Vec<Image>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Empty("response stack".into()))?;
        let (h, w) = (first.height(), first.width());
        if channels.iter().any(|c| c.height() != h || c.width() != w) {
            return Err(Error::Shape("response channels differ in size".into()));
        }
        Ok(Self {
            height: h,
            width: w,
            channels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> &[Image] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

pub fn apply_bank(image: &Image, bank: &FilterBank, border: BorderMode) -> ResponseStack {
    ResponseStack {
        height: image.height(),
        width: image.width(),
        channels: bank
            .kernels()
            .iter()
            .map(|k| convolve2d(image, k, border))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::{make_bank, Preset};

    #[test]
    fn delta_reproduces_kernel() {
        let img = Image::from_fn(7, 7, |y, x| if y == 3 && x == 3 { 1.0 } else { 0.0 }).unwrap();
        let vals: Vec<f64> = (0..25).map(|i| i as f64 * 0.1 - 1.0).collect();
        let k = Kernel::new(5, vals).unwrap();
        let out = convolve2d(&img, &k, BorderMode::Zero);
        // correlation with a delta gives the kernel rotated by 180 degrees
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(out.at(1 + r, 1 + c), k.at(4 - r, 4 - c));
            }
        }
    }

    #[test]
    fn identity_kernel_is_identity() {
        let img = Image::from_fn(4, 6, |y, x| (y as f64).sin() + x as f64).unwrap();
        for border in [BorderMode::Zero, BorderMode::Replicate] {
            assert_eq!(convolve2d(&img, &Kernel::identity(), border), img);
        }
    }

    #[test]
    fn replicate_border_keeps_constant_images_constant() {
        let img = Image::filled(3, 3, 0.5).unwrap();
        let k = Kernel::new(3, vec![1.0 / 9.0; 9]).unwrap();
        let out = convolve2d(&img, &k, BorderMode::Replicate);
        assert!(out.pixels().iter().all(|&p| (p - 0.5).abs() < 1e-15));
        let out = convolve2d(&img, &k, BorderMode::Zero);
        assert!((out.at(0, 0) - 0.5 * 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn bank_channels_follow_bank_order() {
        let img = Image::from_fn(32, 32, |y, x| ((x * 3 + y) % 7) as f64 / 7.0).unwrap();
        let bank = make_bank(Preset::AgeGender);
        let stack = apply_bank(&img, &bank, BorderMode::Replicate);
        assert_eq!(stack.len(), 8);
        for (ch, k) in stack.channels().iter().zip(bank.kernels()) {
            assert_eq!((ch.height(), ch.width()), (32, 32));
            assert_eq!(*ch, convolve2d(&img, k, BorderMode::Replicate));
        }
    }

    #[test]
    fn parses_border_names() {
        assert_eq!("zero".parse::<BorderMode>().unwrap(), BorderMode::Zero);
        assert!("wrap".parse::<BorderMode>().is_err());
    }
}
