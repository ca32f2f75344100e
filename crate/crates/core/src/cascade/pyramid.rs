//! Multi-scale image pyramid for the proposal stage.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Level size over source size, before rounding to whole pixels.
    pub scale: f64,
    pub image: Image,
}

impl Level {
    /// Level coordinate to source coordinate (window edges, not centres).
    pub fn to_source(&self, v: f64) -> f64 {
        v / self.scale
    }

    pub fn to_level(&self, v: f64) -> f64 {
        v * self.scale
    }
}

/// Levels at scales `s0 * f^k` with `s0 = window / min_size`, each level a
/// bilinear resize of the previous one, until the shorter side drops below
/// `window`. An image already smaller than one window yields no levels.
pub fn pyramid(image: &Image, f: f64, min_size: f64, window: usize) -> Result<Vec<Level>> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidParam(format!("pyramid factor {f} outside (0, 1)")));
    }
    if !(min_size > 0.0) || !min_size.is_finite() {
        return Err(Error::InvalidParam(format!("min face size {min_size}")));
    }
    if window == 0 {
        return Err(Error::InvalidParam("window must be positive".into()));
    }
    let (h, w) = (image.height() as f64, image.width() as f64);
    let dims = |s: f64| ((h * s).round() as usize, (w * s).round() as usize);
    let mut levels: Vec<Level> = Vec::new();
    let mut scale = window as f64 / min_size;
    loop {
        let (lh, lw) = dims(scale);
        if lh.min(lw) < window {
            break;
        }
        let img = match levels.last() {
            None if (lh, lw) == (image.height(), image.width()) => image.clone(),
            None => image.resize(lh, lw)?,
            Some(prev) => prev.image.resize(lh, lw)?,
        };
        levels.push(Level { scale, image: img });
        scale *= f;
    }
    Ok(levels)
}
