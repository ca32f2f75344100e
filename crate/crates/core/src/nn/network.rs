use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{Aux, Layer, LayerSpec};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Training pass; `key` selects the dropout masks. The trainer derives it
    /// from the step counter and the sample's position in the batch.
    Train { key: u64 },
}

/// Activations saved by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    version: u64,
    inputs: Vec<Tensor>,
    aux: Vec<Aux>,
}

/// Per-layer parameter gradients, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net.layers.iter().map(|l| vec![0.0; l.params.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.layers.iter_mut().flatten() {
            *v *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A feed-forward stack of layers with materialized parameters.
#[derive(Debug)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<Layer>,
    seed: u64,
    /// Optimizer steps applied so far; zero means untrained.
    steps: u64,
    id: u64,
    version: u64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            input_shape: self.input_shape,
            layers: self.layers.clone(),
            seed: self.seed,
            steps: self.steps,
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers == other.layers
            && self.seed == other.seed
            && self.steps == other.steps
    }
}

impl Network {
    pub fn new(input_shape: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Empty("network has no layers".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if matches!(spec, LayerSpec::Fusion1x1) && shape.channels < 2 {
                return Err(Error::Layer {
                    index: i,
                    msg: format!("fusion needs image plus responses, got {shape}"),
                });
            }
            let layer = Layer::new(*spec, shape, i, &mut rng)?;
            shape = layer.output;
            layers.push(layer);
        }
        Ok(Self {
            input_shape,
            layers,
            seed,
            steps: 0,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().expect("non-empty").output
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_trained(&self) -> bool {
        self.steps > 0
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    /// Replace one layer's parameters.
    pub fn set_params(&mut self, layer: usize, params: Vec<f64>) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| Error::InvalidParam(format!("no layer {layer}")))?;
        if params.len() != l.params.len() {
            return Err(Error::Layer {
                index: layer,
                msg: format!("expected {} parameters, got {}", l.params.len(), params.len()),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameters of layer {layer}")));
        }
        l.params = params;
        self.version += 1;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.version += 1;
        self.layers.iter_mut().map(|l| &mut l.params)
    }

    pub(crate) fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
    }

    pub(crate) fn bump_steps(&mut self) {
        self.steps += 1;
    }

    /// Weights of the leading fusion layer, if the network has one.
    pub fn fusion_weights(&self) -> Option<&[f64]> {
        match self.layers.first() {
            Some(l) if l.spec == LayerSpec::Fusion1x1 => Some(&l.params),
            _ => None,
        }
    }

    fn dropout_mask(&self, layer: usize, rate: f64, len: usize, key: u64) -> Vec<f64> {
        let stream = mix64(mix64(self.seed ^ 0xD809_0000) ^ mix64(key) ^ (layer as u64).rotate_left(40));
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let keep = 1.0 - rate;
        (0..len)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    pub fn forward(&self, input: &Tensor, mode: Mode) -> Result<(Tensor, ForwardCache)> {
        if input.shape() != self.input_shape {
            return Err(Error::Layer {
                index: 0,
                msg: format!("expected input {}, got {}", self.input_shape, input.shape()),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mask = match (layer.spec, mode) {
                (LayerSpec::Dropout { rate }, Mode::Train { key }) if rate > 0.0 => {
                    Some(self.dropout_mask(i, rate, x.len(), key))
                }
                _ => None,
            };
            let (y, a) = layer.forward(&x, mask);
            inputs.push(x);
            aux.push(a);
            x = y;
        }
        Ok((
            x,
            ForwardCache {
                net_id: self.id,
                version: self.version,
                inputs,
                aux,
            },
        ))
    }

    /// Output only, evaluation mode.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input, Mode::Eval).map(|(y, _)| y)
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient with
    /// respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Tensor) -> Result<(Gradients, Tensor)> {
        let mut grads = Gradients::zeros_like(self);
        let gin = self.backward_into(cache, loss_grad, &mut grads)?;
        Ok((grads, gin))
    }

    /// Like [`Network::backward`] but accumulates into existing gradients.
    pub fn backward_into(&self, cache: &ForwardCache, loss_grad: &Tensor, grads: &mut Gradients) -> Result<Tensor> {
        if cache.net_id != self.id || cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        if loss_grad.shape() != self.output_shape() {
            return Err(Error::Shape(format!(
                "loss gradient {} does not match output {}",
                loss_grad.shape(),
                self.output_shape()
            )));
        }
        let mut g = loss_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(&cache.inputs[i], &cache.aux[i], &g, &mut grads.layers[i]);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fc_outputs_zero() {
        let mut net = Network::new(Shape::flat(4), &[LayerSpec::FullyConnected { out_dim: 1 }], 3).unwrap();
        net.set_params(0, vec![0.0; 5]).unwrap();
        let y = net.predict(&Tensor::from_vec(vec![1.0, -2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[0.0]);
    }

    #[test]
    fn fc_gradient_is_input() {
        let net = Network::new(Shape::flat(3), &[LayerSpec::FullyConnected { out_dim: 1 }], 3).unwrap();
        let x = Tensor::from_vec(vec![0.5, -1.5, 2.0]);
        let (_, cache) = net.forward(&x, Mode::Eval).unwrap();
        let (g, _) = net.backward(&cache, &Tensor::from_vec(vec![1.0])).unwrap();
        assert_eq!(&g.layers[0][..3], x.data());
        assert_eq!(g.layers[0][3], 1.0);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let specs = [
            LayerSpec::Conv2D {
                out_channels: 2,
                kernel_size: 3,
                stride: 1,
                pad: 1,
            },
            LayerSpec::ReLU,
            LayerSpec::FullyConnected { out_dim: 2 },
        ];
        let net = Network::new(Shape::new(4, 4, 1), &specs, 9).unwrap();
        let x = Tensor::new(Shape::new(4, 4, 1), (0..16).map(|i| i as f64 / 8.0 - 1.0).collect()).unwrap();
        let (_, cache) = net.forward(&x, Mode::Eval).unwrap();
        let (g, gin) = net.backward(&cache, &Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(gin.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_and_stale_cache_are_reported() {
        let mut net = Network::new(Shape::flat(2), &[LayerSpec::FullyConnected { out_dim: 1 }], 0).unwrap();
        assert!(matches!(
            net.forward(&Tensor::from_vec(vec![1.0]), Mode::Eval),
            Err(Error::Layer { index: 0, .. })
        ));
        let (_, cache) = net.forward(&Tensor::from_vec(vec![1.0, 2.0]), Mode::Eval).unwrap();
        net.set_params(0, vec![1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            net.backward(&cache, &Tensor::from_vec(vec![1.0])),
            Err(Error::StaleCache)
        ));
        let other = net.clone();
        let (_, cache) = other.forward(&Tensor::from_vec(vec![1.0, 2.0]), Mode::Eval).unwrap();
        assert!(matches!(
            net.backward(&cache, &Tensor::from_vec(vec![1.0])),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn bad_layer_chain_reports_index() {
        let specs = [
            LayerSpec::FullyConnected { out_dim: 4 },
            LayerSpec::MaxPool { size: 2, stride: 2 },
        ];
        assert!(matches!(
            Network::new(Shape::flat(3), &specs, 0),
            Err(Error::Layer { index: 1, .. })
        ));
    }

    #[test]
    fn dropout_train_masks_are_keyed_and_eval_is_identity() {
        let net = Network::new(Shape::flat(64), &[LayerSpec::Dropout { rate: 0.5 }], 5).unwrap();
        let x = Tensor::from_vec(vec![1.0; 64]);
        let a = net.forward(&x, Mode::Train { key: 1 }).unwrap().0;
        let b = net.forward(&x, Mode::Train { key: 1 }).unwrap().0;
        let c = net.forward(&x, Mode::Train { key: 2 }).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(net.predict(&x).unwrap(), x);
    }
}
