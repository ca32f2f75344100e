//! Input schemes and the network architectures used by each task.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::convolve::{apply_bank, BorderMode, ResponseStack};
use crate::error::{Error, Result};
use crate::fusion::stack;
use crate::gabor::{FilterBank, Preset};
use crate::image::Image;
use crate::nn::{LayerSpec, LossKind, Network, Shape, Tensor};

/// How an image is presented to a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// The grayscale image alone.
    Image,
    /// Image and its bank responses as an `(Nf + 1)`-channel tensor.
    Gt,
    /// The same tensor collapsed by a learned 1x1 fusion layer.
    Gf,
}

impl InputMode {
    pub fn channels(self, bank_len: usize) -> usize {
        match self {
            InputMode::Image => 1,
            InputMode::Gt | InputMode::Gf => bank_len + 1,
        }
    }

    /// Layers placed in front of the shared body.
    pub fn stem(self) -> Vec<LayerSpec> {
        match self {
            InputMode::Gf => vec![LayerSpec::Fusion1x1],
            _ => Vec::new(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputMode::Image => "image",
            InputMode::Gt => "gt",
            InputMode::Gf => "gf",
        }
    }
}

impl FromStr for InputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "image" => Ok(InputMode::Image),
            "gt" | "tensor" => Ok(InputMode::Gt),
            "gf" | "fused" => Ok(InputMode::Gf),
            _ => Err(Error::InvalidParam(format!("unknown input mode {s:?} (image, gt, gf)"))),
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Network input for `image` under `mode`. Responses use replicated borders.
pub fn prepare_input(image: &Image, bank: &FilterBank, mode: InputMode) -> Result<Tensor> {
    match mode {
        InputMode::Image => Ok(Tensor::from_image(image)),
        InputMode::Gt | InputMode::Gf => stack(image, &apply_bank(image, bank, BorderMode::Replicate)),
    }
}

/// Like [`prepare_input`] but without responses for the image mode, so the
/// bank is only touched when needed.
pub fn prepare_input_with(image: &Image, responses: Option<&ResponseStack>) -> Result<Tensor> {
    match responses {
        None => Ok(Tensor::from_image(image)),
        Some(r) => stack(image, r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Age group classification over [`AGE_GROUPS`] classes.
    AgeClass,
    /// Age regression in years.
    AgeReg,
    Gender,
    /// Synthetic stripe orientation, four classes.
    Orient,
    PNet,
    RNet,
    ONet,
}

pub const AGE_GROUPS: usize = 8;

impl Task {
    pub fn loss(self) -> LossKind {
        match self {
            Task::AgeClass | Task::Gender | Task::Orient => LossKind::SoftmaxCE,
            Task::AgeReg => LossKind::Mae,
            Task::PNet | Task::RNet | Task::ONet => LossKind::DetJoint { bbox_weight: 0.5 },
        }
    }

    pub fn classes(self) -> usize {
        match self {
            Task::AgeClass => AGE_GROUPS,
            Task::Gender => 2,
            Task::Orient => 4,
            Task::AgeReg => 1,
            Task::PNet | Task::RNet | Task::ONet => 5,
        }
    }

    /// Default square input side.
    pub fn input_size(self) -> usize {
        match self {
            Task::AgeClass | Task::AgeReg | Task::Gender => 64,
            Task::Orient => 16,
            Task::PNet => 12,
            Task::RNet => 24,
            Task::ONet => 48,
        }
    }

    /// Filter bank preset matching the task.
    pub fn preset(self) -> Preset {
        match self {
            Task::AgeClass | Task::AgeReg | Task::Gender | Task::Orient => Preset::AgeGender,
            Task::PNet | Task::RNet | Task::ONet => Preset::Detection,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::AgeClass => "age-class",
            Task::AgeReg => "age-reg",
            Task::Gender => "gender",
            Task::Orient => "orient",
            Task::PNet => "pnet",
            Task::RNet => "rnet",
            Task::ONet => "onet",
        }
    }

    /// Layers after the input stem, including the output layer.
    pub fn body(self) -> Vec<LayerSpec> {
        let mut s = Vec::new();
        let head = LayerSpec::FullyConnected {
            out_dim: self.loss().output_len().unwrap_or(self.classes()),
        };
        let dense = |s: &mut Vec<LayerSpec>, out_dim| {
            s.push(LayerSpec::FullyConnected { out_dim });
            s.push(LayerSpec::ReLU);
        };
        match self {
            Task::AgeClass | Task::AgeReg | Task::Gender => {
                for c in [16, 32, 64] {
                    s.extend(LayerSpec::conv_block(c, 3));
                }
                s.extend(LayerSpec::fc_block(128, 0.5));
                s.extend(LayerSpec::fc_block(64, 0.5));
            }
            Task::Orient => {
                for c in [8, 16] {
                    s.extend(LayerSpec::conv_block(c, 3));
                }
                s.extend(LayerSpec::fc_block(32, 0.25));
            }
            Task::PNet => {
                for c in [10, 16] {
                    s.extend(LayerSpec::conv_block(c, 3));
                }
                dense(&mut s, 32);
            }
            Task::RNet => {
                for c in [8, 16, 16] {
                    s.extend(LayerSpec::conv_block(c, 3));
                }
                dense(&mut s, 64);
            }
            Task::ONet => {
                for c in [8, 12, 16, 16] {
                    s.extend(LayerSpec::conv_block(c, 3));
                }
                dense(&mut s, 64);
            }
        }
        s.push(head);
        s
    }

    /// Untrained network for `mode` on `size x size` inputs.
    pub fn build(self, mode: InputMode, size: usize, bank_len: usize, seed: u64) -> Result<Network> {
        let mut specs = mode.stem();
        specs.extend(self.body());
        Network::new(Shape::new(size, size, mode.channels(bank_len)), &specs, seed)
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "age-class" | "age" => Ok(Task::AgeClass),
            "age-reg" => Ok(Task::AgeReg),
            "gender" => Ok(Task::Gender),
            "orient" => Ok(Task::Orient),
            "pnet" => Ok(Task::PNet),
            "rnet" => Ok(Task::RNet),
            "onet" => Ok(Task::ONet),
            _ => Err(Error::InvalidParam(format!(
                "unknown task {s:?} (age-class, age-reg, gender, orient, pnet, rnet, onet)"
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
