//! Three-stage detection: sliding proposals over a pyramid, then two
//! refinement stages on resampled crops.

use serde::{Deserialize, Serialize};

use super::bbox::{calibrate, iou, nms, BBox, Detection};
use super::pyramid::pyramid;
use crate::convolve::{apply_bank, BorderMode};
use crate::error::{Error, Result};
use crate::fusion::stack;
use crate::gabor::FilterBank;
use crate::image::Image;
use crate::nn::loss::sigmoid;
use crate::nn::{Network, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Score thresholds of the three stages.
    pub thresholds: [f64; 3],
    /// NMS IoU thresholds of the three stages.
    pub nms_iou: [f64; 3],
    /// Pyramid scale factor.
    pub factor: f64,
    /// Smallest face side searched, in source pixels.
    pub min_face: f64,
    pub windows: [usize; 3],
    /// Proposal window stride in level pixels.
    pub stride: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            thresholds: [0.6, 0.7, 0.8],
            nms_iou: [0.7, 0.7, 0.5],
            factor: 0.709,
            min_face: 16.0,
            windows: [12, 24, 48],
            stride: 2,
        }
    }
}

impl CascadeConfig {
    /// Errors for invalid values; returns warnings for legal but unusual ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (i, t) in self.thresholds.iter().chain(&self.nms_iou).enumerate() {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::InvalidParam(format!("threshold {i} = {t} outside [0, 1]")));
            }
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidParam(format!("pyramid factor {} outside (0, 1)", self.factor)));
        }
        if !(self.min_face > 0.0) || self.stride == 0 || self.windows.contains(&0) {
            return Err(Error::InvalidParam("min face, stride and windows must be positive".into()));
        }
        let [t1, t2, t3] = self.thresholds;
        let mut warnings = Vec::new();
        if !(t1 <= t2 && t2 <= t3) {
            warnings.push(format!("stage thresholds {t1}, {t2}, {t3} are not non-decreasing"));
        }
        Ok(warnings)
    }
}

/// Network input for the source region `bbox` resampled to `size x size`.
/// The region is grown by the bank radius so responses near the crop edge
/// see real context, then the centre is kept.
pub fn crop_input(image: &Image, bbox: &BBox, size: usize, bank: Option<&FilterBank>) -> Result<Tensor> {
    let Some(bank) = bank else {
        return Ok(Tensor::from_image(&image.crop_resize(bbox.x, bbox.y, bbox.w, bbox.h, size, size)?));
    };
    let r = bank.max_radius();
    let (px, py) = (bbox.w / size as f64, bbox.h / size as f64);
    let big = image.crop_resize(
        bbox.x - r as f64 * px,
        bbox.y - r as f64 * py,
        bbox.w + 2.0 * r as f64 * px,
        bbox.h + 2.0 * r as f64 * py,
        size + 2 * r,
        size + 2 * r,
    )?;
    let t = stack(&big, &apply_bank(&big, bank, BorderMode::Replicate))?;
    t.window(r, r, size, size)
}

fn level_input(image: &Image, bank: Option<&FilterBank>) -> Result<Tensor> {
    match bank {
        None => Ok(Tensor::from_image(image)),
        Some(b) => stack(image, &apply_bank(image, b, BorderMode::Replicate)),
    }
}

fn score_and_reg(net: &Network, x: &Tensor) -> Result<(f64, [f64; 4])> {
    let out = net.predict(x)?;
    let o = out.data();
    Ok((sigmoid(o[0]), [o[1], o[2], o[3], o[4]]))
}

/// Trained stage networks, the bank feeding them and the search settings.
#[derive(Debug, Clone)]
pub struct Cascade {
    nets: [Network; 3],
    bank: FilterBank,
    cfg: CascadeConfig,
}

impl Cascade {
    pub fn new(pnet: Network, rnet: Network, onet: Network, bank: FilterBank, cfg: CascadeConfig) -> Result<Self> {
        cfg.validate()?;
        let nets = [pnet, rnet, onet];
        for (i, net) in nets.iter().enumerate() {
            let s = net.input_shape();
            let w = cfg.windows[i];
            if !net.is_trained() {
                return Err(Error::InvalidParam(format!("stage {} network is untrained", i + 1)));
            }
            if s.height != w || s.width != w {
                return Err(Error::Shape(format!("stage {} expects {w}x{w} input, network takes {s}", i + 1)));
            }
            if s.channels != 1 && s.channels != bank.len() + 1 {
                return Err(Error::Shape(format!(
                    "stage {} input has {} channels; bank gives {}",
                    i + 1,
                    s.channels,
                    bank.len() + 1
                )));
            }
            if net.output_shape().len() != 5 {
                return Err(Error::Shape(format!("stage {} must output a score and 4 offsets", i + 1)));
            }
        }
        Ok(Self { nets, bank, cfg })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.cfg
    }

    pub fn nets(&self) -> &[Network; 3] {
        &self.nets
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    fn bank_for(&self, stage: usize) -> Option<&FilterBank> {
        (self.nets[stage].input_shape().channels > 1).then_some(&self.bank)
    }

    /// Stage-one windows scoring at least `threshold`, in source
    /// coordinates, before any suppression.
    pub fn proposals(&self, image: &Image, threshold: f64) -> Result<Vec<Detection>> {
        let win = self.cfg.windows[0];
        let mut out = Vec::new();
        for level in pyramid(image, self.cfg.factor, self.cfg.min_face, win)? {
            let t = level_input(&level.image, self.bank_for(0))?;
            let (h, w) = (level.image.height(), level.image.width());
            for ly in (0..=h - win).step_by(self.cfg.stride) {
                for lx in (0..=w - win).step_by(self.cfg.stride) {
                    let (score, reg) = score_and_reg(&self.nets[0], &t.window(ly, lx, win, win)?)?;
                    if score >= threshold {
                        let side = level.to_source(win as f64);
                        let bbox = BBox {
                            x: level.to_source(lx as f64),
                            y: level.to_source(ly as f64),
                            w: side,
                            h: side,
                        };
                        out.push(Detection::new(bbox, score, reg)?);
                    }
                }
            }
        }
        Ok(out)
    }

    fn refine(&self, stage: usize, image: &Image, cands: &[Detection]) -> Result<Vec<Detection>> {
        let win = self.cfg.windows[stage];
        let mut kept = Vec::new();
        for c in cands {
            let x = crop_input(image, &c.bbox, win, self.bank_for(stage))?;
            let (score, reg) = score_and_reg(&self.nets[stage], &x)?;
            if score >= self.cfg.thresholds[stage] {
                kept.push(Detection::new(c.bbox, score, reg)?);
            }
        }
        Ok(kept)
    }

    /// Calibrated boxes, optionally squared, with offsets consumed.
    fn settle(dets: &[Detection], square: bool) -> Vec<Detection> {
        dets.iter()
            .filter_map(|d| {
                let b = calibrate(d)?;
                let b = if square { b.square() } else { b };
                Some(Detection {
                    bbox: b,
                    score: d.score,
                    reg: [0.0; 4],
                })
            })
            .collect()
    }

    /// Detections in source coordinates, ordered by score descending, then
    /// `x`, then `y`.
    pub fn detect(&self, image: &Image) -> Result<Vec<Detection>> {
        let [t1, _, _] = self.cfg.thresholds;
        let [n1, n2, n3] = self.cfg.nms_iou;
        let stage1 = Self::settle(&nms(&self.proposals(image, t1)?, n1), true);
        if stage1.is_empty() {
            return Ok(Vec::new());
        }
        let stage2 = Self::settle(&nms(&self.refine(1, image, &stage1)?, n2), true);
        if stage2.is_empty() {
            return Ok(Vec::new());
        }
        let stage3 = Self::settle(&self.refine(2, image, &stage2)?, false);
        let (w, h) = (image.width() as f64, image.height() as f64);
        let clipped: Vec<Detection> = stage3
            .into_iter()
            .filter_map(|d| {
                d.bbox.clip(w, h).map(|bbox| Detection { bbox, ..d })
            })
            .collect();
        Ok(nms(&clipped, n3))
    }
}

/// Matching summary in the style of FDDB: a discrete score counting matched
/// faces and a continuous score summing their overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionScore {
    pub faces: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    /// Sum of IoU over matched pairs.
    pub overlap_sum: f64,
}

impl DetectionScore {
    /// Matched faces over all faces.
    pub fn discrete(&self) -> f64 {
        if self.faces == 0 {
            0.0
        } else {
            self.true_positives as f64 / self.faces as f64
        }
    }

    /// Mean IoU of matches over all faces.
    pub fn continuous(&self) -> f64 {
        if self.faces == 0 {
            0.0
        } else {
            self.overlap_sum / self.faces as f64
        }
    }

    pub fn merge(&mut self, other: &DetectionScore) {
        self.faces += other.faces;
        self.detections += other.detections;
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.overlap_sum += other.overlap_sum;
    }
}

/// Greedy one-to-one matching: detections in score order each take the
/// unmatched face they overlap most, if that overlap is at least
/// `iou_thresh`.
pub fn score_detections(dets: &[Detection], faces: &[BBox], iou_thresh: f64) -> DetectionScore {
    let mut order = dets.to_vec();
    order.sort_by(super::bbox::detection_order);
    let mut taken = vec![false; faces.len()];
    let mut s = DetectionScore {
        faces: faces.len(),
        detections: dets.len(),
        ..Default::default()
    };
    for d in &order {
        let best = faces
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, f)| (i, iou(&d.bbox, f)))
            .filter(|&(_, o)| o >= iou_thresh)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((i, o)) => {
                taken[i] = true;
                s.true_positives += 1;
                s.overlap_sum += o;
            }
            None => s.false_positives += 1,
        }
    }
    s
}
