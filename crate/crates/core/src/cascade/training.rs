//! Stage training data: labelled crops around planted faces in synthetic
//! scenes, produced lazily so large crop sets stay cheap.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bbox::{iou, reg_between, BBox};
use super::detector::{crop_input, Cascade, CascadeConfig};
use crate::data::synth::Scene;
use crate::error::{Error, Result};
use crate::gabor::{make_bank, FilterBank, Preset};
use crate::image::Image;
use crate::models::{InputMode, Task};
use crate::nn::{mix64, train, Dataset, EpochMetrics, LrSchedule, Network, Target, Tensor, TrainConfig};

pub const POS_IOU: f64 = 0.65;
pub const PART_IOU: f64 = 0.4;
pub const NEG_IOU: f64 = 0.3;

/// Crops drawn per scene for each label kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropMix {
    pub pos: usize,
    pub part: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crop {
    pub scene: usize,
    pub bbox: BBox,
    pub target: Target,
}

fn jittered(rng: &mut impl Rng, g: &BBox, scale: (f64, f64), shift: f64) -> BBox {
    let s = g.w.max(g.h) * rng.random_range(scale.0..scale.1);
    let cx = g.x + g.w / 2.0 + rng.random_range(-shift..shift) * g.w;
    let cy = g.y + g.h / 2.0 + rng.random_range(-shift..shift) * g.h;
    BBox {
        x: cx - s / 2.0,
        y: cy - s / 2.0,
        w: s,
        h: s,
    }
}

/// Labelled square crops from every scene. Positives overlap the face by at
/// least [`POS_IOU`], parts by `[PART_IOU, POS_IOU)`, negatives by less
/// than [`NEG_IOU`]. Half the negatives sit near the face.
pub fn sample_crops(scenes: &[Scene], mix: CropMix, min_side: f64, seed: u64) -> Vec<Crop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        let (w, h) = (scene.image.width() as f64, scene.image.height() as f64);
        let best_iou = |b: &BBox| scene.faces.iter().map(|f| iou(b, f)).fold(0.0, f64::max);
        for face in &scene.faces {
            let mut got = 0;
            for _ in 0..mix.pos * 50 {
                if got == mix.pos {
                    break;
                }
                let b = jittered(&mut rng, face, (0.85, 1.2), 0.12);
                if best_iou(&b) >= POS_IOU {
                    out.push(Crop {
                        scene: si,
                        bbox: b,
                        target: Target::Face {
                            label: Some(true),
                            reg: Some(reg_between(&b, face)),
                        },
                    });
                    got += 1;
                }
            }
            let mut got = 0;
            for _ in 0..mix.part * 50 {
                if got == mix.part {
                    break;
                }
                let b = jittered(&mut rng, face, (0.75, 1.35), 0.4);
                let o = best_iou(&b);
                if (PART_IOU..POS_IOU).contains(&o) {
                    out.push(Crop {
                        scene: si,
                        bbox: b,
                        target: Target::Face {
                            label: None,
                            reg: Some(reg_between(&b, face)),
                        },
                    });
                    got += 1;
                }
            }
        }
        let mut got = 0;
        for attempt in 0..mix.neg * 50 {
            if got == mix.neg {
                break;
            }
            let b = match (attempt % 2, scene.faces.first()) {
                (0, Some(face)) => jittered(&mut rng, face, (0.5, 1.8), 1.0),
                _ => {
                    let s = rng.random_range(min_side..=w.min(h).max(min_side));
                    BBox {
                        x: rng.random_range(0.0..=(w - s).max(0.0)),
                        y: rng.random_range(0.0..=(h - s).max(0.0)),
                        w: s,
                        h: s,
                    }
                }
            };
            if best_iou(&b) < NEG_IOU && b.clip(w, h).is_some_and(|c| c.area() >= 0.5 * b.area()) {
                out.push(Crop {
                    scene: si,
                    bbox: b,
                    target: Target::Face {
                        label: Some(false),
                        reg: None,
                    },
                });
                got += 1;
            }
        }
    }
    out
}

/// Crops materialized on demand as network inputs.
pub struct CropSet<'a> {
    images: Vec<&'a Image>,
    crops: Vec<Crop>,
    size: usize,
    bank: Option<&'a FilterBank>,
}

impl<'a> CropSet<'a> {
    pub fn new(scenes: &'a [Scene], crops: Vec<Crop>, size: usize, bank: Option<&'a FilterBank>) -> Result<Self> {
        if let Some(c) = crops.iter().find(|c| c.scene >= scenes.len()) {
            return Err(Error::InvalidParam(format!("crop refers to scene {}", c.scene)));
        }
        Ok(Self {
            images: scenes.iter().map(|s| &s.image).collect(),
            crops,
            size,
            bank,
        })
    }

    pub fn crops(&self) -> &[Crop] {
        &self.crops
    }
}

impl Dataset for CropSet<'_> {
    fn len(&self) -> usize {
        self.crops.len()
    }

    fn input(&self, i: usize) -> Result<Cow<'_, Tensor>> {
        let c = &self.crops[i];
        crop_input(self.images[c.scene], &c.bbox, self.size, self.bank).map(Cow::Owned)
    }

    fn target(&self, i: usize) -> Target {
        self.crops[i].target
    }
}

/// Settings for training one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTraining {
    pub mix: CropMix,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTraining {
    pub stages: [StageTraining; 3],
    pub mode: InputMode,
    pub seed: u64,
}

impl Default for CascadeTraining {
    fn default() -> Self {
        let st = |pos, part, neg, epochs| StageTraining {
            mix: CropMix { pos, part, neg },
            epochs,
            batch_size: 32,
            lr: 0.005,
        };
        Self {
            stages: [st(8, 4, 16, 10), st(6, 3, 12, 10), st(4, 2, 8, 10)],
            mode: InputMode::Gf,
            seed: 1,
        }
    }
}

pub const STAGE_TASKS: [Task; 3] = [Task::PNet, Task::RNet, Task::ONet];

/// Train one stage network on crops of `scenes`.
pub fn train_stage(
    stage: usize,
    scenes: &[Scene],
    settings: &StageTraining,
    mode: InputMode,
    bank: &FilterBank,
    window: usize,
    seed: u64,
) -> Result<(Network, Vec<EpochMetrics>)> {
    let task = *STAGE_TASKS
        .get(stage)
        .ok_or_else(|| Error::InvalidParam(format!("stage {stage} out of range")))?;
    let stage_seed = mix64(seed ^ mix64(stage as u64 + 11));
    let crops = sample_crops(scenes, settings.mix, window as f64, stage_seed);
    let use_bank = (mode != InputMode::Image).then_some(bank);
    let data = CropSet::new(scenes, crops, window, use_bank)?;
    let mut net = task.build(mode, window, bank.len(), stage_seed)?;
    let cfg = TrainConfig {
        lr: LrSchedule::step_decay(settings.lr, settings.epochs),
        ..TrainConfig::new(task.loss(), settings.epochs, settings.batch_size, stage_seed)
    };
    let history = train(&mut net, &data, None::<&CropSet>, &cfg)?;
    Ok((net, history))
}

/// Train all three stages and assemble a detector with `cfg`.
pub fn train_cascade(scenes: &[Scene], settings: &CascadeTraining, cfg: CascadeConfig) -> Result<(Cascade, Vec<Vec<EpochMetrics>>)> {
    let bank = make_bank(Preset::Detection);
    let mut nets = Vec::with_capacity(3);
    let mut histories = Vec::with_capacity(3);
    for stage in 0..3 {
        let (net, h) = train_stage(stage, scenes, &settings.stages[stage], settings.mode, &bank, cfg.windows[stage], settings.seed)?;
        nets.push(net);
        histories.push(h);
    }
    let [p, r, o]: [Network; 3] = nets.try_into().expect("three stages");
    Ok((Cascade::new(p, r, o, bank, cfg)?, histories))
}
