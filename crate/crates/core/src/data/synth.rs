//! Seeded synthetic datasets: oriented stripe patches for classification and
//! scenes with one planted face-like pattern for the detection cascade.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cascade::BBox;
use crate::error::{Error, Result};
use crate::image::Image;

/// Number of orientation classes; class `k` has stripe normal at `k * pi / 4`.
pub const ORIENTATIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationSpec {
    pub n: usize,
    /// Image side length.
    pub size: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
    /// Stripe wavelength in pixels.
    pub wavelength: f64,
    /// Stripe amplitude around the 0.5 background.
    pub contrast: f64,
    /// Side of the square stripe patch.
    pub patch: usize,
    /// Samples sharing one synthetic subject id.
    pub per_subject: usize,
}

impl OrientationSpec {
    pub fn new(n: usize, size: usize, noise: f64, seed: u64) -> Self {
        Self {
            n,
            size,
            noise,
            seed,
            wavelength: 2.5,
            contrast: 0.25,
            patch: (size * 5).div_ceil(8),
            per_subject: ORIENTATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: usize,
    pub subject: String,
}

/// Sample `i` has label `i % 4`, so any `n` divisible by 4 is exactly
/// balanced. Each sample draws its own patch position and phase.
pub fn make_synthetic_orientation_set(spec: &OrientationSpec) -> Result<Vec<LabeledImage>> {
    if spec.n == 0 {
        return Err(Error::Empty("orientation set size".into()));
    }
    if spec.size == 0 || spec.patch == 0 || spec.patch > spec.size {
        return Err(Error::InvalidParam(format!("patch {} in image {}", spec.patch, spec.size)));
    }
    if !(spec.noise >= 0.0) || !(spec.wavelength > 0.0) || spec.per_subject == 0 {
        return Err(Error::InvalidParam("noise, wavelength and per_subject must be valid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut out = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let label = i % ORIENTATIONS;
        let theta = label as f64 * PI / ORIENTATIONS as f64;
        let (s, c) = theta.sin_cos();
        let phase = rng.random_range(0.0..2.0 * PI);
        let py = rng.random_range(0..=spec.size - spec.patch);
        let px = rng.random_range(0..=spec.size - spec.patch);
        let mut pixels = Vec::with_capacity(spec.size * spec.size);
        for y in 0..spec.size {
            for x in 0..spec.size {
                let inside = (py..py + spec.patch).contains(&y) && (px..px + spec.patch).contains(&x);
                let mut v = 0.5;
                if inside {
                    let t = x as f64 * c + y as f64 * s;
                    v += spec.contrast * (2.0 * PI * t / spec.wavelength + phase).cos();
                }
                if spec.noise > 0.0 {
                    v += normal.sample(&mut rng);
                }
                pixels.push(v);
            }
        }
        out.push(LabeledImage {
            image: Image::new(spec.size, spec.size, pixels)?,
            label,
            subject: format!("s{:05}", i / spec.per_subject),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub size: usize,
    pub min_face: f64,
    pub max_face: f64,
    pub noise: f64,
    /// Face-free clutter patterns per scene.
    pub distractors: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            size: 64,
            min_face: 18.0,
            max_face: 36.0,
            noise: 0.03,
            distractors: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub faces: Vec<BBox>,
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn gauss2(du: f64, dv: f64, s: f64) -> f64 {
    (-(du * du + dv * dv) / (2.0 * s * s)).exp()
}

/// Face-like pattern over normalized box coordinates: returns
/// `(value, alpha)`. A bright ellipse with horizontal texture, two dark eye
/// blobs and a dark mouth bar.
pub fn face_pattern(u: f64, v: f64) -> (f64, f64) {
    let eu = (u - 0.5) / 0.44;
    let ev = (v - 0.52) / 0.5;
    let r = (eu * eu + ev * ev).sqrt();
    let alpha = 1.0 - smoothstep(0.85, 1.0, r);
    if alpha <= 0.0 {
        return (0.0, 0.0);
    }
    let mut val = 0.78 + 0.04 * (2.0 * PI * 5.0 * v).cos();
    val -= 0.55 * gauss2(u - 0.32, v - 0.4, 0.075);
    val -= 0.55 * gauss2(u - 0.68, v - 0.4, 0.075);
    let mouth = (-((v - 0.74) / 0.045).powi(2) / 2.0).exp() * (1.0 - smoothstep(0.16, 0.22, (u - 0.5).abs()));
    val -= 0.45 * mouth;
    (val, alpha)
}

/// A bright ellipse of the same footprint without eyes or mouth.
fn blank_blob(u: f64, v: f64) -> (f64, f64) {
    let eu = (u - 0.5) / 0.44;
    let ev = (v - 0.52) / 0.5;
    let r = (eu * eu + ev * ev).sqrt();
    let alpha = 1.0 - smoothstep(0.85, 1.0, r);
    (0.78 + 0.04 * (2.0 * PI * 5.0 * v).cos(), alpha)
}

/// Dark blobs without the surrounding ellipse.
fn features_only(u: f64, v: f64) -> (f64, f64) {
    let d = 0.55 * gauss2(u - 0.32, v - 0.4, 0.075) + 0.55 * gauss2(u - 0.68, v - 0.4, 0.075);
    (0.35 - d, d.min(1.0))
}

fn paint(pixels: &mut [f64], size: usize, bx: &BBox, pattern: impl Fn(f64, f64) -> (f64, f64)) {
    let x0 = bx.x.floor().max(0.0) as usize;
    let y0 = bx.y.floor().max(0.0) as usize;
    let x1 = ((bx.x + bx.w).ceil() as usize).min(size);
    let y1 = ((bx.y + bx.h).ceil() as usize).min(size);
    for y in y0..y1 {
        for x in x0..x1 {
            let u = (x as f64 + 0.5 - bx.x) / bx.w;
            let v = (y as f64 + 0.5 - bx.y) / bx.h;
            if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                continue;
            }
            let (val, a) = pattern(u, v);
            let p = &mut pixels[y * size + x];
            *p = *p * (1.0 - a) + val * a;
        }
    }
}

fn random_box(rng: &mut impl Rng, size: usize, min: f64, max: f64) -> BBox {
    let s = rng.random_range(min..=max);
    let limit = (size as f64 - s).max(0.0);
    BBox {
        x: rng.random_range(0.0..=limit),
        y: rng.random_range(0.0..=limit),
        w: s,
        h: s,
    }
}

/// One scene with a single planted face (`with_face`) or none.
pub fn make_scene(spec: &SceneSpec, with_face: bool, rng: &mut impl Rng) -> Result<Scene> {
    if spec.size < 12 || !(spec.min_face > 0.0) || spec.max_face < spec.min_face || spec.max_face > spec.size as f64 {
        return Err(Error::InvalidParam("scene size and face range are inconsistent".into()));
    }
    let size = spec.size;
    let mut pixels = vec![0.0; size * size];
    // smooth background: a random linear ramp plus two wide bumps
    let (ax, ay) = (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
    let bumps: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.0..size as f64),
                rng.random_range(0.0..size as f64),
                rng.random_range(6.0..16.0),
                rng.random_range(-0.12..0.12),
            )
        })
        .collect();
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 / size as f64 - 0.5, y as f64 / size as f64 - 0.5);
            let mut v = 0.35 + ax * fx + ay * fy;
            for &(cx, cy, s, amp) in &bumps {
                v += amp * gauss2(x as f64 - cx, y as f64 - cy, s);
            }
            pixels[y * size + x] = v;
        }
    }
    for _ in 0..spec.distractors {
        let b = random_box(rng, size, spec.min_face * 0.8, spec.max_face);
        match rng.random_range(0..3) {
            0 => paint(&mut pixels, size, &b, blank_blob),
            1 => paint(&mut pixels, size, &b, features_only),
            _ => {
                let (theta, lam) = (rng.random_range(0.0..PI), rng.random_range(3.0..8.0));
                let (s, c) = theta.sin_cos();
                paint(&mut pixels, size, &b, |u, v| {
                    let t = (u * c + v * s) * b.w;
                    (0.5 + 0.25 * (2.0 * PI * t / lam).cos(), 0.8)
                });
            }
        }
    }
    let mut faces = Vec::new();
    if with_face {
        let b = random_box(rng, size, spec.min_face, spec.max_face);
        paint(&mut pixels, size, &b, face_pattern);
        faces.push(b);
    }
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).expect("valid sigma");
        for p in &mut pixels {
            *p += normal.sample(rng);
        }
    }
    Ok(Scene {
        image: Image::new(size, size, pixels)?,
        faces,
    })
}

/// `n` seeded scenes, each with exactly one face.
pub fn make_scenes(spec: &SceneSpec, n: usize, seed: u64) -> Result<Vec<Scene>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| make_scene(spec, true, &mut rng)).collect()
}
