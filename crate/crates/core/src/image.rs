//! Single-channel floating point images.

use crate::error::{Error, Result};

/// Row-major grayscale image, `pixels[y * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty(format!("image {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("image pixels".into()));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self::new(height, width, pixels)
    }

    /// Constructor for callers that already guarantee the invariants.
    pub(crate) fn from_parts(height: usize, width: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped into the image.
    #[inline]
    pub fn at_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Bilinear sample at continuous coordinates; out-of-range positions use
    /// the nearest edge pixel.
    pub fn sample_bilinear(&self, sy: f64, sx: f64) -> f64 {
        let sy = sy.clamp(0.0, (self.height - 1) as f64);
        let sx = sx.clamp(0.0, (self.width - 1) as f64);
        let y0 = sy.floor() as usize;
        let x0 = sx.floor() as usize;
        let y1 = (y0 + 1).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let fy = sy - y0 as f64;
        let fx = sx - x0 as f64;
        let top = self.at(y0, x0) * (1.0 - fx) + self.at(y0, x1) * fx;
        let bottom = self.at(y1, x0) * (1.0 - fx) + self.at(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear resize with pixel-centre alignment:
    /// `src = (dst + 0.5) * src_len / dst_len - 0.5`.
    pub fn resize(&self, height: usize, width: usize) -> Result<Image> {
        self.crop_resize(0.0, 0.0, self.width as f64, self.height as f64, height, width)
    }

    /// Resample the source rectangle `(x, y, w, h)` onto an
    /// `out_height x out_width` grid. The rectangle may extend past the
    /// image; samples there replicate the border.
    pub fn crop_resize(
        &self,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        out_height: usize,
        out_width: usize,
    ) -> Result<Image> {
        if out_height == 0 || out_width == 0 {
            return Err(Error::Empty(format!("resize target {out_height}x{out_width}")));
        }
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(Error::InvalidParam(format!("crop region ({x}, {y}, {w}, {h})")));
        }
        let step_x = w / out_width as f64;
        let step_y = h / out_height as f64;
        let mut pixels = Vec::with_capacity(out_height * out_width);
        for oy in 0..out_height {
            let sy = y + (oy as f64 + 0.5) * step_y - 0.5;
            for ox in 0..out_width {
                let sx = x + (ox as f64 + 0.5) * step_x - 0.5;
                pixels.push(self.sample_bilinear(sy, sx));
            }
        }
        Ok(Image::from_parts(out_height, out_width, pixels))
    }

    /// Min-max scale into `0..=255`. Returns the bytes plus the `(min, max)`
    /// used; a constant image maps to all zeros.
    pub fn to_u8_minmax(&self) -> (Vec<u8>, f64, f64) {
        let (lo, hi) = self.min_max();
        let range = hi - lo;
        let bytes = self
            .pixels
            .iter()
            .map(|&p| {
                if range > 0.0 {
                    ((p - lo) / range * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        (bytes, lo, hi)
    }
}
