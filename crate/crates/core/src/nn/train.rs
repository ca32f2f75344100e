//! Minibatch training loop and evaluation metrics.

use std::borrow::Cow;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::loss::{sigmoid, LossKind, Target};
use super::network::{mix64, Gradients, Mode, Network};
use super::optim::Sgd;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: Target,
}

/// Indexed access to training samples. Inputs may be produced lazily.
pub trait Dataset {
    fn len(&self) -> usize;
    fn input(&self, index: usize) -> Result<Cow<'_, Tensor>>;
    fn target(&self, index: usize) -> Target;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Dataset for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }
    fn input(&self, index: usize) -> Result<Cow<'_, Tensor>> {
        Ok(Cow::Borrowed(&self[index].input))
    }
    fn target(&self, index: usize) -> Target {
        self[index].target
    }
}

impl Dataset for Vec<Sample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn input(&self, index: usize) -> Result<Cow<'_, Tensor>> {
        Ok(Cow::Borrowed(&self[index].input))
    }
    fn target(&self, index: usize) -> Target {
        self[index].target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LrSchedule {
    Constant(f64),
    /// `base` until `at_epoch`, then `base * factor`.
    Step { base: f64, factor: f64, at_epoch: usize },
}

impl LrSchedule {
    /// `base`, decayed by 10x after two thirds of the epochs.
    pub fn step_decay(base: f64, epochs: usize) -> Self {
        LrSchedule::Step {
            base,
            factor: 0.1,
            at_epoch: (2 * epochs) / 3,
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant(lr) => lr,
            LrSchedule::Step { base, factor, at_epoch } => {
                if epoch >= at_epoch {
                    base * factor
                } else {
                    base
                }
            }
        }
    }
}

/// Divisor applied to the summed per-sample loss of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalizer {
    BatchSize,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub momentum: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub normalizer: Normalizer,
    /// Keep a leading fusion layer at its current weights.
    pub freeze_fusion: bool,
}

impl TrainConfig {
    pub fn new(loss: LossKind, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            lr: LrSchedule::step_decay(0.01, epochs),
            momentum: 0.9,
            loss,
            seed,
            normalizer: Normalizer::BatchSize,
            freeze_fusion: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    Accuracy(f64),
    Mae(f64),
    /// Mean squared box-offset error.
    BoxL2(f64),
}

impl Metric {
    pub fn value(&self) -> f64 {
        match *self {
            Metric::Accuracy(v) | Metric::Mae(v) | Metric::BoxL2(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy(_) => "accuracy",
            Metric::Mae(_) => "mae",
            Metric::BoxL2(_) => "box_l2",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.6}", self.name(), self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean unnormalized per-sample loss over the epoch.
    pub train_loss: f64,
    pub val: Option<Metric>,
}

impl fmt::Display for EpochMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} lr {:.6} loss {:.6}",
            self.epoch, self.lr, self.train_loss
        )?;
        if let Some(m) = self.val {
            write!(f, " val_{m}")?;
        }
        Ok(())
    }
}

fn check_targets<D: Dataset + ?Sized>(net: &Network, data: &D, loss: LossKind) -> Result<()> {
    let probe = Tensor::zeros(net.output_shape());
    for i in 0..data.len() {
        loss.sample_loss(&probe, &data.target(i))
            .map_err(|e| Error::InvalidParam(format!("sample {i}: {e}")))?;
    }
    Ok(())
}

/// Train with momentum SGD. Reproducible for a fixed seed and data order.
pub fn train<D, V>(net: &mut Network, data: &D, val: Option<&V>, cfg: &TrainConfig) -> Result<Vec<EpochMetrics>>
where
    D: Dataset + ?Sized,
    V: Dataset + ?Sized,
{
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParam("batch size must be positive".into()));
    }
    check_targets(net, data, cfg.loss)?;
    if let Some(v) = val {
        check_targets(net, v, cfg.loss)?;
    }
    let mut opt = Sgd::new(net, cfg.momentum)?;
    let freeze = cfg.freeze_fusion && net.fusion_weights().is_some();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr.lr(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ mix64(epoch as u64 + 1)));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(net);
            let step = net.steps();
            let mut batch_loss = 0.0;
            for (j, &idx) in batch.iter().enumerate() {
                let input = data.input(idx)?;
                let key = (step << 20) | j as u64;
                let (out, cache) = net.forward(&input, Mode::Train { key })?;
                let (l, g) = cfg.loss.sample_loss(&out, &data.target(idx))?;
                batch_loss += l;
                net.backward_into(&cache, &g, &mut grads)?;
            }
            total += batch_loss;
            let norm = match cfg.normalizer {
                Normalizer::BatchSize => batch.len() as f64,
                Normalizer::Fixed(m) => m,
            };
            grads.scale(1.0 / norm);
            if freeze {
                grads.layers[0].iter_mut().for_each(|g| *g = 0.0);
            }
            opt.step(net, &grads, lr)?;
        }
        let train_loss = total / data.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {}", epoch + 1)));
        }
        let val_metric = match val {
            Some(v) if !v.is_empty() => Some(evaluate(net, v, cfg.loss)?),
            _ => None,
        };
        history.push(EpochMetrics {
            epoch: epoch + 1,
            lr,
            train_loss,
            val: val_metric,
        });
    }
    Ok(history)
}

/// Task metric in evaluation mode: accuracy for classification and face
/// scoring, MAE for regression, mean squared offset error for boxes.
pub fn evaluate<D: Dataset + ?Sized>(net: &Network, data: &D, loss: LossKind) -> Result<Metric> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut hits = 0usize;
    let mut counted = 0usize;
    let mut err = 0.0;
    for i in 0..data.len() {
        let out = net.predict(data.input(i)?.as_ref())?;
        let o = out.data();
        match (loss, data.target(i)) {
            (LossKind::SoftmaxCE, Target::Class(y)) => {
                counted += 1;
                if argmax(o) == y {
                    hits += 1;
                }
            }
            (LossKind::Mae | LossKind::Mse, Target::Value(t)) => {
                counted += 1;
                err += (o[0] - t).abs();
            }
            (LossKind::DetCE | LossKind::DetJoint { .. }, target) => {
                let label = match target {
                    Target::Class(c) => Some(c == 1),
                    Target::Face { label, .. } => label,
                    _ => None,
                };
                if let Some(y) = label {
                    counted += 1;
                    if (sigmoid(o[0]) >= 0.5) == y {
                        hits += 1;
                    }
                }
            }
            (LossKind::BBoxL2, Target::Box(t) | Target::Face { reg: Some(t), .. }) => {
                counted += 1;
                err += super::loss::bbox_l2(&[o[0], o[1], o[2], o[3]], &t);
            }
            (kind, t) => {
                return Err(Error::InvalidParam(format!("cannot evaluate {t:?} with {kind:?}")));
            }
        }
    }
    if counted == 0 {
        return Err(Error::Empty("no labelled samples to evaluate".into()));
    }
    let n = counted as f64;
    Ok(match loss {
        LossKind::SoftmaxCE | LossKind::DetCE | LossKind::DetJoint { .. } => Metric::Accuracy(hits as f64 / n),
        LossKind::Mae | LossKind::Mse => Metric::Mae(err / n),
        LossKind::BBoxL2 => Metric::BoxL2(err / n),
    })
}

/// Index of the largest value; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Output layer for a loss: `classes` logits for softmax, otherwise the
/// loss's fixed output size.
pub fn head(loss: LossKind, classes: usize) -> LayerSpec {
    LayerSpec::FullyConnected {
        out_dim: loss.output_len().unwrap_or(classes),
    }
}
