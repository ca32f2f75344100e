//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use gaborcnn::cascade::{BBox, Detection};
use gaborcnn::convolve::BorderMode;
use gaborcnn::gabor::Kernel;
use gaborcnn::Image;

/// Direct evaluation of the Gabor formula at integer offset `(x, y)`.
pub fn gabor_value(x: f64, y: f64, lambda: f64, theta: f64, phi: f64, gamma: f64, sigma: f64) -> f64 {
    let xr = x * theta.cos() + y * theta.sin();
    let yr = -x * theta.sin() + y * theta.cos();
    let env = (-(xr.powi(2) + gamma.powi(2) * yr.powi(2)) / (2.0 * sigma.powi(2))).exp();
    env * (2.0 * PI * xr / lambda + phi).cos()
}

/// Gaussian envelope alone at `(x, y)`.
pub fn gabor_envelope(x: f64, y: f64, theta: f64, gamma: f64, sigma: f64) -> f64 {
    let xr = x * theta.cos() + y * theta.sin();
    let yr = -x * theta.sin() + y * theta.cos();
    (-(xr.powi(2) + gamma.powi(2) * yr.powi(2)) / (2.0 * sigma.powi(2))).exp()
}

/// Quadruple-loop same-size correlation.
pub fn naive_correlate(img: &Image, k: &Kernel, border: BorderMode) -> Vec<f64> {
    let (h, w) = (img.height() as i64, img.width() as i64);
    let s = k.size() as i64;
    let r = s / 2;
    let mut out = vec![0.0; (h * w) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..s {
                for kx in 0..s {
                    let (sy, sx) = (y + ky - r, x + kx - r);
                    let v = if sy >= 0 && sy < h && sx >= 0 && sx < w {
                        img.pixels()[(sy * w + sx) as usize]
                    } else {
                        match border {
                            BorderMode::Zero => 0.0,
                            BorderMode::Replicate => {
                                let cy = sy.clamp(0, h - 1);
                                let cx = sx.clamp(0, w - 1);
                                img.pixels()[(cy * w + cx) as usize]
                            }
                        }
                    };
                    acc += v * k.values()[(ky * s + kx) as usize];
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// Bilinear resize with pixel-centre alignment and clamped edges.
pub fn bilinear_resize(img: &Image, out_h: usize, out_w: usize) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let px = |y: usize, x: usize| img.pixels()[y * w + x];
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * h as f64 / out_h as f64 - 0.5).max(0.0).min((h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = if y0 + 1 < h { y0 + 1 } else { y0 };
        let ty = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * w as f64 / out_w as f64 - 0.5).max(0.0).min((w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = if x0 + 1 < w { x0 + 1 } else { x0 };
            let tx = sx - x0 as f64;
            let v = px(y0, x0) * (1.0 - ty) * (1.0 - tx)
                + px(y0, x1) * (1.0 - ty) * tx
                + px(y1, x0) * ty * (1.0 - tx)
                + px(y1, x1) * ty * tx;
            out.push(v);
        }
    }
    out
}

/// Overlap from explicit corner coordinates.
pub fn iou_oracle(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = (a.x, a.y, a.x + a.w, a.y + a.h);
    let (bx1, by1, bx2, by2) = (b.x, b.y, b.x + b.w, b.y + b.h);
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter)
}

/// Suppression by exhaustive search: among all subsets of `dets`, the one
/// where each detection is kept exactly when no kept detection ranked
/// before it overlaps it by more than `thresh`. Returns kept indices in
/// rank order and asserts the subset is unique.
pub fn nms_oracle(dets: &[Detection], thresh: f64) -> Vec<usize> {
    let n = dets.len();
    assert!(n <= 16, "exhaustive oracle is exponential");
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&i, &j| {
        let (a, b) = (&dets[i], &dets[j]);
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.bbox.x.partial_cmp(&b.bbox.x).unwrap())
            .then(a.bbox.y.partial_cmp(&b.bbox.y).unwrap())
    });
    let mut found: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        let kept = |pos: usize| mask & (1 << pos) != 0;
        let consistent = (0..n).all(|p| {
            let blocked = (0..p).any(|q| kept(q) && iou_oracle(&dets[rank[p]].bbox, &dets[rank[q]].bbox) > thresh);
            kept(p) == !blocked
        });
        if consistent {
            assert!(found.is_none(), "greedy assignment must be unique");
            found = Some((0..n).filter(|&p| kept(p)).map(|p| rank[p]).collect());
        }
    }
    found.expect("a consistent assignment always exists")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
