use super::network::{Gradients, Network};
use crate::error::{Error, Result};

/// Momentum SGD: `v <- momentum * v - lr * g`, `w <- w + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(net: &Network, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParam(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Self {
            momentum,
            velocity: net.layers().iter().map(|l| vec![0.0; l.params().len()]).collect(),
        })
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidParam(format!("learning rate must be >= 0, got {lr}")));
        }
        if grads.layers.len() != self.velocity.len() {
            return Err(Error::Shape("gradients do not match the network".into()));
        }
        for ((params, v), g) in net.params_mut().zip(&mut self.velocity).zip(&grads.layers) {
            if g.len() != params.len() {
                return Err(Error::Shape("gradients do not match the network".into()));
            }
            for ((p, vi), gi) in params.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = self.momentum * *vi - lr * gi;
                *p += *vi;
            }
        }
        net.bump_steps();
        Ok(())
    }
}

/// Single momentum-SGD update with fresh (zero) velocity.
pub fn sgd_step(net: &mut Network, grads: &Gradients, lr: f64, momentum: f64) -> Result<()> {
    Sgd::new(net, momentum)?.step(net, grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Shape};

    fn scalar_net(w: f64) -> Network {
        // 1 -> 1 fully connected: one weight and one bias
        let mut net = Network::new(Shape::flat(1), &[LayerSpec::FullyConnected { out_dim: 1 }], 0).unwrap();
        net.set_params(0, vec![w, 0.0]).unwrap();
        net
    }

    fn grads(g: f64) -> Gradients {
        Gradients { layers: vec![vec![g, 0.0]] }
    }

    #[test]
    fn zero_lr_leaves_parameters() {
        let mut net = scalar_net(1.0);
        sgd_step(&mut net, &grads(5.0), 0.0, 0.9).unwrap();
        assert_eq!(net.layers()[0].params()[0], 1.0);
    }

    #[test]
    fn plain_step() {
        let mut net = scalar_net(1.0);
        sgd_step(&mut net, &grads(2.0), 0.1, 0.0).unwrap();
        assert!((net.layers()[0].params()[0] - 0.8).abs() < 1e-15);
        assert_eq!(net.steps(), 1);
    }

    #[test]
    fn two_momentum_steps_match_unrolled_recurrence() {
        let mut net = scalar_net(1.0);
        let mut opt = Sgd::new(&net, 0.9).unwrap();
        opt.step(&mut net, &grads(2.0), 0.1).unwrap();
        opt.step(&mut net, &grads(-1.0), 0.1).unwrap();
        // v1 = -0.2, w1 = 0.8; v2 = 0.9 * -0.2 + 0.1 = -0.08, w2 = 0.72
        assert!((net.layers()[0].params()[0] - 0.72).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_momentum() {
        assert!(Sgd::new(&scalar_net(0.0), 1.0).is_err());
    }
}
