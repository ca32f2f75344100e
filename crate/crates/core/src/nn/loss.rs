//! Losses and their gradients with respect to the network output.
//!
//! Batch losses are sums of per-sample terms divided by a normalizer; the
//! trainer supplies the normalizer (batch size unless configured).

use serde::{Deserialize, Serialize};

use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Probability clamp for binary cross-entropy.
pub const DET_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    /// Softmax cross-entropy over class logits.
    SoftmaxCE,
    /// Absolute error on a single regression output.
    Mae,
    /// Squared error on a single regression output.
    Mse,
    /// Binary cross-entropy on a single face logit (sigmoid applied).
    DetCE,
    /// Squared L2 distance between 4 box offsets and their target.
    BBoxL2,
    /// Face logit plus 4 box offsets, `det_ce + bbox_weight * bbox_l2`.
    /// The classification term skips part samples, the box term skips
    /// negatives.
    DetJoint { bbox_weight: f64 },
}

/// Supervision for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Value(f64),
    Box([f64; 4]),
    /// `label`: Some(true) face, Some(false) background, None part sample.
    /// `reg`: box offsets for faces and part samples.
    Face {
        label: Option<bool>,
        reg: Option<[f64; 4]>,
    },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.into()))
    }
}

/// `-log p[label]` with `p = softmax(logits)`, via log-sum-exp.
pub fn softmax_ce(logits: &[f64], label: usize) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::InvalidParam(format!("need >= 2 classes, got {}", logits.len())));
    }
    if label >= logits.len() {
        return Err(Error::InvalidParam(format!("label {label} out of {} classes", logits.len())));
    }
    check_finite("logits", logits)?;
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Mean softmax cross-entropy over a batch.
pub fn softmax_ce_batch(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::Shape("logits and labels must be non-empty and equal length".into()));
    }
    let mut sum = 0.0;
    for (z, &y) in logits.iter().zip(labels) {
        sum += softmax_ce(z, y)?;
    }
    Ok(sum / logits.len() as f64)
}

fn paired(preds: &[f64], targets: &[f64], normalizer: f64) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions vs {} targets", preds.len(), targets.len())));
    }
    if !(normalizer > 0.0) || !normalizer.is_finite() {
        return Err(Error::InvalidParam(format!("normalizer must be > 0, got {normalizer}")));
    }
    check_finite("predictions", preds)?;
    check_finite("targets", targets)
}

/// `(1 / normalizer) * sum |pred - target|`.
pub fn mae(preds: &[f64], targets: &[f64], normalizer: f64) -> Result<f64> {
    paired(preds, targets, normalizer)?;
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / normalizer)
}

/// `(1 / normalizer) * sum (pred - target)^2`.
pub fn mse(preds: &[f64], targets: &[f64], normalizer: f64) -> Result<f64> {
    paired(preds, targets, normalizer)?;
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / normalizer)
}

/// Binary cross-entropy `-(y log p + (1 - y) log(1 - p))`, with `p` clamped
/// to `[DET_EPS, 1 - DET_EPS]`.
pub fn det_ce(p: f64, y: bool) -> f64 {
    let p = p.clamp(DET_EPS, 1.0 - DET_EPS);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Squared Euclidean distance between two box offset vectors.
pub fn bbox_l2(pred: &[f64; 4], target: &[f64; 4]) -> f64 {
    pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn expect_len(output: &Tensor, n: usize, what: &str) -> Result<()> {
    if output.len() != n {
        return Err(Error::Shape(format!("{what} expects {n} outputs, got {}", output.len())));
    }
    Ok(())
}

fn mismatch(kind: LossKind, target: &Target) -> Error {
    Error::InvalidParam(format!("target {target:?} is not usable with {kind:?}"))
}

/// `d det_ce(sigmoid(z), y) / dz`, zero inside the clamped region.
fn det_logit_grad(z: f64, y: bool) -> f64 {
    let p = sigmoid(z);
    if !(DET_EPS..=1.0 - DET_EPS).contains(&p) {
        0.0
    } else {
        p - if y { 1.0 } else { 0.0 }
    }
}

impl LossKind {
    /// Unnormalized loss of one sample and its gradient with respect to the
    /// network output.
    pub fn sample_loss(&self, output: &Tensor, target: &Target) -> Result<(f64, Tensor)> {
        let out = output.data();
        check_finite("network output", out)?;
        let mut grad = vec![0.0; out.len()];
        let loss = match (*self, *target) {
            (LossKind::SoftmaxCE, Target::Class(y)) => {
                let l = softmax_ce(out, y)?;
                for (g, p) in grad.iter_mut().zip(softmax(out)) {
                    *g = p;
                }
                grad[y] -= 1.0;
                l
            }
            (LossKind::Mae, Target::Value(t)) => {
                expect_len(output, 1, "MAE")?;
                let d = out[0] - t;
                grad[0] = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                d.abs()
            }
            (LossKind::Mse, Target::Value(t)) => {
                expect_len(output, 1, "MSE")?;
                let d = out[0] - t;
                grad[0] = 2.0 * d;
                d * d
            }
            (LossKind::DetCE, Target::Class(c)) if c < 2 => {
                expect_len(output, 1, "DetCE")?;
                grad[0] = det_logit_grad(out[0], c == 1);
                det_ce(sigmoid(out[0]), c == 1)
            }
            (LossKind::DetCE, Target::Face { label: Some(y), .. }) => {
                expect_len(output, 1, "DetCE")?;
                grad[0] = det_logit_grad(out[0], y);
                det_ce(sigmoid(out[0]), y)
            }
            (LossKind::BBoxL2, Target::Box(t)) | (LossKind::BBoxL2, Target::Face { reg: Some(t), .. }) => {
                expect_len(output, 4, "BBoxL2")?;
                let p = [out[0], out[1], out[2], out[3]];
                for i in 0..4 {
                    grad[i] = 2.0 * (p[i] - t[i]);
                }
                bbox_l2(&p, &t)
            }
            (LossKind::DetJoint { bbox_weight }, Target::Face { label, reg }) => {
                expect_len(output, 5, "DetJoint")?;
                let mut l = 0.0;
                if let Some(y) = label {
                    grad[0] = det_logit_grad(out[0], y);
                    l += det_ce(sigmoid(out[0]), y);
                }
                if let Some(t) = reg {
                    let p = [out[1], out[2], out[3], out[4]];
                    for i in 0..4 {
                        grad[i + 1] = bbox_weight * 2.0 * (p[i] - t[i]);
                    }
                    l += bbox_weight * bbox_l2(&p, &t);
                }
                l
            }
            (kind, t) => return Err(mismatch(kind, &t)),
        };
        Ok((loss, Tensor::new(output.shape(), grad).expect("same shape")))
    }

    /// Output size this loss expects, where fixed.
    pub fn output_len(&self) -> Option<usize> {
        match self {
            LossKind::SoftmaxCE => None,
            LossKind::Mae | LossKind::Mse | LossKind::DetCE => Some(1),
            LossKind::BBoxL2 => Some(4),
            LossKind::DetJoint { .. } => Some(5),
        }
    }

    pub fn output_shape(&self, classes: usize) -> Shape {
        Shape::flat(self.output_len().unwrap_or(classes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_n() {
        let l = softmax_ce(&[0.3; 8], 5).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_gives_tiny_loss() {
        let mut z = vec![0.0; 4];
        z[2] = 20.0;
        assert!(softmax_ce(&z, 2).unwrap() <= 1e-6);
    }

    #[test]
    fn softmax_is_stable_and_normalized() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_ce_rejects_bad_input() {
        assert!(softmax_ce(&[1.0], 0).is_err());
        assert!(softmax_ce(&[1.0, 2.0], 2).is_err());
        assert!(softmax_ce(&[1.0, f64::NAN], 0).is_err());
    }

    #[test]
    fn mae_hand_case() {
        assert_eq!(mae(&[30.0, 40.0], &[25.0, 45.0], 2.0).unwrap(), 5.0);
        assert_eq!(mae(&[3.0], &[3.0], 1.0).unwrap(), 0.0);
        assert!(mae(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn det_ce_values() {
        assert!(det_ce(1.0, true) < 1e-11);
        assert!((det_ce(0.5, true) - 2f64.ln()).abs() < 1e-15);
        assert!((det_ce(0.25, false) - (-(0.75f64).ln())).abs() < 1e-15);
        assert!(det_ce(0.0, true).is_finite());
    }

    #[test]
    fn bbox_l2_values() {
        assert_eq!(bbox_l2(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]), 0.0);
        assert_eq!(bbox_l2(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]), 1.0);
    }

    #[test]
    fn mae_subgradient_at_zero_is_zero() {
        let (_, g) = LossKind::Mae
            .sample_loss(&Tensor::from_vec(vec![2.0]), &Target::Value(2.0))
            .unwrap();
        assert_eq!(g.data(), &[0.0]);
    }

    #[test]
    fn mismatched_target_is_an_error() {
        let out = Tensor::from_vec(vec![0.0, 1.0]);
        assert!(LossKind::SoftmaxCE.sample_loss(&out, &Target::Value(1.0)).is_err());
        assert!(LossKind::Mae.sample_loss(&out, &Target::Value(1.0)).is_err());
    }

    #[test]
    fn joint_loss_skips_missing_terms() {
        let out = Tensor::from_vec(vec![0.0, 0.1, 0.2, 0.3, 0.4]);
        let kind = LossKind::DetJoint { bbox_weight: 0.5 };
        let (l, g) = kind
            .sample_loss(&out, &Target::Face { label: Some(false), reg: None })
            .unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(&g.data()[1..], &[0.0; 4]);
        let (l, g) = kind
            .sample_loss(&out, &Target::Face { label: None, reg: Some([0.0; 4]) })
            .unwrap();
        assert!((l - 0.5 * 0.30).abs() < 1e-12);
        assert_eq!(g.data()[0], 0.0);
    }
}
