//! Central finite-difference checks of analytic network gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::LayerSpec;
use super::loss::{LossKind, Target};
use super::network::{Gradients, Mode, Network};
use super::tensor::{Shape, Tensor};
use crate::error::Result;

/// Central differences `(f(x + eps) - f(x - eps)) / (2 eps)` per coordinate.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], eps: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + eps;
            let hi = f(&x);
            x[i] = point[i] - eps;
            let lo = f(&x);
            x[i] = point[i];
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps exact zeros comparable.
pub fn relative_error(a: f64, b: f64) -> f64 {
    const FLOOR: f64 = 1e-7;
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Mean loss of a batch in train mode with fixed dropout keys.
fn batch_loss(net: &Network, batch: &[(Tensor, Target)], loss: LossKind) -> Result<f64> {
    let mut total = 0.0;
    for (j, (x, t)) in batch.iter().enumerate() {
        let (out, _) = net.forward(x, Mode::Train { key: j as u64 })?;
        total += loss.sample_loss(&out, t)?.0;
    }
    Ok(total / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Largest relative error over all parameters and input values.
    pub max_rel_error: f64,
    /// Number of scalar derivatives compared.
    pub checked: usize,
}

/// Compare backward-pass gradients of every parameter and every input value
/// against central differences with step `eps`.
pub fn check_network(net: &Network, batch: &[(Tensor, Target)], loss: LossKind, eps: f64) -> Result<CheckResult> {
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut input_grads = Vec::with_capacity(batch.len());
    for (j, (x, t)) in batch.iter().enumerate() {
        let (out, cache) = net.forward(x, Mode::Train { key: j as u64 })?;
        let (_, g) = loss.sample_loss(&out, t)?;
        input_grads.push(net.backward_into(&cache, &g, &mut grads)?);
    }
    grads.scale(1.0 / n);

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = net.clone();
    for layer in 0..net.layers().len() {
        let point = net.layers()[layer].params().to_vec();
        if point.is_empty() {
            continue;
        }
        let numeric = finite_diff_grad(
            |p| {
                probe.set_params(layer, p.to_vec()).expect("same length");
                batch_loss(&probe, batch, loss).expect("valid batch")
            },
            &point,
            eps,
        );
        probe.set_params(layer, point)?;
        for (a, b) in grads.layers[layer].iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *b));
            checked += 1;
        }
    }
    for (j, (x, t)) in batch.iter().enumerate() {
        let shape = x.shape();
        let numeric = finite_diff_grad(
            |v| {
                let xi = Tensor::new(shape, v.to_vec()).expect("same shape");
                let (out, _) = net.forward(&xi, Mode::Train { key: j as u64 }).expect("shape");
                loss.sample_loss(&out, t).expect("valid target").0 / n
            },
            x.data(),
            eps,
        );
        for (a, b) in input_grads[j].data().iter().zip(&numeric) {
            // per-sample input gradient is unscaled; the batch mean divides by n
            worst = worst.max(relative_error(a / n, *b));
            checked += 1;
        }
    }
    Ok(CheckResult {
        max_rel_error: worst,
        checked,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub configs: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(description, max relative error)` per configuration.
    pub details: Vec<(String, f64)>,
}

const LOSSES: [LossKind; 6] = [
    LossKind::SoftmaxCE,
    LossKind::Mae,
    LossKind::Mse,
    LossKind::DetCE,
    LossKind::BBoxL2,
    LossKind::DetJoint { bbox_weight: 0.5 },
];

fn architecture(kind: usize, head: usize) -> (Shape, Vec<LayerSpec>) {
    let fc = |out_dim| LayerSpec::FullyConnected { out_dim };
    match kind {
        // fused input, one conv block
        0 => {
            let mut s = vec![LayerSpec::Fusion1x1];
            s.extend(LayerSpec::conv_block(2, 3));
            s.push(fc(head));
            (Shape::new(6, 6, 5), s)
        }
        // strided conv, dropout, two dense layers
        1 => (
            Shape::new(7, 5, 2),
            vec![
                LayerSpec::Conv2D {
                    out_channels: 3,
                    kernel_size: 3,
                    stride: 2,
                    pad: 1,
                },
                LayerSpec::ReLU,
                LayerSpec::Dropout { rate: 0.3 },
                fc(4),
                LayerSpec::ReLU,
                fc(head),
            ],
        ),
        // two conv blocks and a dense block on a 16x16x9 tensor
        2 => {
            let mut s = Vec::new();
            s.extend(LayerSpec::conv_block(3, 3));
            s.extend(LayerSpec::conv_block(4, 3));
            s.extend(LayerSpec::fc_block(6, 0.5));
            s.push(fc(head));
            (Shape::new(16, 16, 9), s)
        }
        // overlapping pooling, unpadded conv
        _ => (
            Shape::new(8, 8, 3),
            vec![
                LayerSpec::Fusion1x1,
                LayerSpec::Conv2D {
                    out_channels: 2,
                    kernel_size: 3,
                    stride: 1,
                    pad: 0,
                },
                LayerSpec::ReLU,
                LayerSpec::MaxPool { size: 3, stride: 1 },
                fc(head),
            ],
        ),
    }
}

fn random_target(loss: LossKind, classes: usize, rng: &mut impl Rng) -> Target {
    let mut reg = || {
        [
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ]
    };
    match loss {
        LossKind::SoftmaxCE => Target::Class(rng.random_range(0..classes)),
        // far from any plausible output so |pred - target| has no kink nearby
        LossKind::Mae => Target::Value(if rng.random_bool(0.5) { 25.0 } else { -25.0 }),
        LossKind::Mse => Target::Value(rng.random_range(-2.0..2.0)),
        LossKind::DetCE => Target::Class(rng.random_range(0..2)),
        LossKind::BBoxL2 => Target::Box(reg()),
        LossKind::DetJoint { .. } => {
            let r = reg();
            match rng.random_range(0..3) {
                0 => Target::Face { label: Some(true), reg: Some(r) },
                1 => Target::Face { label: Some(false), reg: None },
                _ => Target::Face { label: None, reg: Some(r) },
            }
        }
    }
}

/// Run `configs` random configurations cycling through every loss and a
/// set of architectures that together cover every layer type.
pub fn run_suite(seed: u64, configs: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut details = Vec::with_capacity(configs);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in 0..configs {
        let loss = LOSSES[c % LOSSES.len()];
        let arch = (c / LOSSES.len()) % 4;
        let classes = rng.random_range(2..6);
        let (shape, specs) = architecture(arch, loss.output_len().unwrap_or(classes));
        let net = Network::new(shape, &specs, rng.random())?;
        let batch: Vec<(Tensor, Target)> = (0..2)
            .map(|_| {
                let x = Tensor::new(shape, (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .expect("shape");
                (x, random_target(loss, classes, &mut rng))
            })
            .collect();
        let res = check_network(&net, &batch, loss, 1e-4)?;
        worst = worst.max(res.max_rel_error);
        checked += res.checked;
        details.push((format!("config {c}: arch {arch} loss {loss:?}"), res.max_rel_error));
    }
    Ok(SuiteReport {
        configs,
        checked,
        max_rel_error: worst,
        details,
    })
}
