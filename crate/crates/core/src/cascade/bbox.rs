//! Boxes, overlap, suppression and regression-based calibration.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box: top-left corner and extent in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidParam(format!("box ({x}, {y}, {w}, {h})")))
        }
    }

    /// Finite coordinates and positive extent.
    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Square of side `max(w, h)` sharing the centre.
    pub fn square(&self) -> BBox {
        let s = self.w.max(self.h);
        BBox {
            x: self.x + (self.w - s) / 2.0,
            y: self.y + (self.h - s) / 2.0,
            w: s,
            h: s,
        }
    }

    /// Intersection with `[0, width] x [0, height]`, if non-empty.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        (x1 > x0 && y1 > y0).then_some(BBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

/// Scored box with regression offsets `(dx, dy, dw, dh)` relative to its size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub reg: [f64; 4],
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, reg: [f64; 4]) -> Result<Self> {
        if !bbox.is_valid() {
            return Err(Error::InvalidParam(format!("{bbox:?}")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidParam(format!("score {score} outside [0, 1]")));
        }
        Ok(Self { bbox, score, reg })
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Score descending, then `x` ascending, then `y` ascending.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.x.total_cmp(&b.bbox.x))
        .then(a.bbox.y.total_cmp(&b.bbox.y))
}

/// Greedy suppression: keep the best remaining detection, drop everything
/// overlapping it by more than `iou_thresh`, repeat. Output is in
/// [`detection_order`].
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(detection_order);
    let mut suppressed = vec![false; sorted.len()];
    let mut kept = Vec::new();
    for i in 0..sorted.len() {
        if suppressed[i] {
            continue;
        }
        kept.push(sorted[i]);
        for j in i + 1..sorted.len() {
            if !suppressed[j] && iou(&sorted[i].bbox, &sorted[j].bbox) > iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Apply regression offsets: `x + dx w`, `y + dy h`, `w (1 + dw)`,
/// `h (1 + dh)`. `None` when the result has no positive extent.
pub fn calibrate(det: &Detection) -> Option<BBox> {
    let b = det.bbox;
    let [dx, dy, dw, dh] = det.reg;
    let out = BBox {
        x: b.x + dx * b.w,
        y: b.y + dy * b.h,
        w: b.w * (1.0 + dw),
        h: b.h * (1.0 + dh),
    };
    out.is_valid().then_some(out)
}

/// Offsets that [`calibrate`] maps `from` onto `to`.
pub fn reg_between(from: &BBox, to: &BBox) -> [f64; 4] {
    [
        (to.x - from.x) / from.w,
        (to.y - from.y) / from.h,
        to.w / from.w - 1.0,
        to.h / from.h - 1.0,
    ]
}
