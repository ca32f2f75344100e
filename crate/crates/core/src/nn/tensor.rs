use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// `(height, width, channels)`. A flat vector of length `n` is `(1, 1, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn flat(n: usize) -> Self {
        Self::new(1, 1, n)
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Channel-last, row-major: `data[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "tensor {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: Shape::flat(data.len()),
            data,
        }
    }

    pub fn from_image(image: &Image) -> Self {
        Self {
            shape: Shape::new(image.height(), image.width(), 1),
            data: image.pixels().to_vec(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    /// Copy out one channel as an image.
    pub fn channel(&self, c: usize) -> Result<Image> {
        if c >= self.shape.channels {
            return Err(Error::Shape(format!("channel {c} of {}", self.shape)));
        }
        let px = self.data.iter().skip(c).step_by(self.shape.channels).copied().collect();
        Image::new(self.shape.height, self.shape.width, px)
    }

    /// Copy a `height x width` window with its top-left corner at `(y, x)`.
    pub fn window(&self, y: usize, x: usize, height: usize, width: usize) -> Result<Tensor> {
        if y + height > self.shape.height || x + width > self.shape.width {
            return Err(Error::Shape(format!(
                "window {height}x{width} at ({y}, {x}) exceeds {}",
                self.shape
            )));
        }
        let c = self.shape.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for row in y..y + height {
            let start = (row * self.shape.width + x) * c;
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        Ok(Tensor {
            shape: Shape::new(height, width, c),
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
