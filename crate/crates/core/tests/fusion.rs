mod common;

use gaborcnn::convolve::{apply_bank, BorderMode};
use gaborcnn::fusion::{fuse, fuse_backward, stack, FusionWeights};
use gaborcnn::gabor::{make_bank, Preset};
use gaborcnn::nn::gradcheck::relative_error;
use gaborcnn::nn::{LayerSpec, Network, Shape, Tensor};
use gaborcnn::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::max_abs_diff;

fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    Tensor::new(Shape::new(h, w, c), (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, c: usize) -> FusionWeights {
    FusionWeights::from_slice(&(0..c).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap()
}

fn loop_fuse(t: &Tensor, w: &[f64]) -> Vec<f64> {
    let s = t.shape();
    let mut out = Vec::new();
    for y in 0..s.height {
        for x in 0..s.width {
            out.push((0..s.channels).map(|c| w[c] * t.at(y, x, c)).sum());
        }
    }
    out
}

#[test]
fn matches_loop_and_fusion_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..10), rng.random_range(1..10));
        let t = random_tensor(&mut rng, h, w, 9);
        let wts = random_weights(&mut rng, 9);
        let fused = fuse(&t, &wts).unwrap();
        assert!(max_abs_diff(fused.pixels(), &loop_fuse(&t, &wts.to_vec())) <= 1e-12);

        let mut net = Network::new(Shape::new(h, w, 9), &[LayerSpec::Fusion1x1], 0).unwrap();
        net.set_params(0, wts.to_vec()).unwrap();
        let out = net.predict(&t).unwrap();
        assert_eq!(out.shape(), Shape::new(h, w, 1));
        assert!(max_abs_diff(out.data(), fused.pixels()) <= 1e-12);
    }
}

#[test]
fn linear_in_the_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let t = random_tensor(&mut rng, 6, 5, 9);
        let a = random_weights(&mut rng, 9);
        let b = random_weights(&mut rng, 9);
        let (s, u) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix: Vec<f64> = a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| s * x + u * y).collect();
        let lhs = fuse(&t, &FusionWeights::from_slice(&mix).unwrap()).unwrap();
        let fa = fuse(&t, &a).unwrap();
        let fb = fuse(&t, &b).unwrap();
        let rhs: Vec<f64> = fa.pixels().iter().zip(fb.pixels()).map(|(x, y)| s * x + u * y).collect();
        assert!(max_abs_diff(lhs.pixels(), &rhs) <= 1e-10);
    }
}

#[test]
fn identity_weights_return_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let img = Image::from_fn(12, 10, |_, _| rng.random_range(0.0..1.0)).unwrap();
    let t = stack(&img, &apply_bank(&img, &make_bank(Preset::AgeGender), BorderMode::Replicate)).unwrap();
    let mut w = vec![0.0; 9];
    w[0] = 1.0;
    assert_eq!(fuse(&t, &FusionWeights::from_slice(&w).unwrap()).unwrap(), img);
}

/// Loss `sum g * f^2 / 2` over the fused image `f`.
fn quad_loss(t: &Tensor, w: &[f64], g: &[f64]) -> f64 {
    let f = fuse(t, &FusionWeights::from_slice(w).unwrap()).unwrap();
    f.pixels().iter().zip(g).map(|(f, g)| 0.5 * g * f * f).sum()
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..120 {
        let (h, w) = (rng.random_range(1..6), rng.random_range(1..6));
        let c = rng.random_range(2..10);
        let t = random_tensor(&mut rng, h, w, c);
        let wts = random_weights(&mut rng, c);
        let g: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fused = fuse(&t, &wts).unwrap();
        let grad_out = Image::new(h, w, fused.pixels().iter().zip(&g).map(|(f, g)| g * f).collect()).unwrap();
        let (gw, gt) = fuse_backward(&t, &wts, &grad_out).unwrap();

        let wv = wts.to_vec();
        for (i, &analytic) in gw.to_vec().iter().enumerate() {
            let mut p = wv.clone();
            p[i] += eps;
            let up = quad_loss(&t, &p, &g);
            p[i] -= 2.0 * eps;
            let down = quad_loss(&t, &p, &g);
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic, numeric));
        }
        for i in 0..t.len() {
            let mut d = t.data().to_vec();
            d[i] += eps;
            let up = quad_loss(&Tensor::new(t.shape(), d.clone()).unwrap(), &wv, &g);
            d[i] -= 2.0 * eps;
            let down = quad_loss(&Tensor::new(t.shape(), d).unwrap(), &wv, &g);
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(gt.data()[i], numeric));
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

fn body() -> Vec<LayerSpec> {
    let mut specs = LayerSpec::conv_block(4, 3).to_vec();
    specs.push(LayerSpec::FullyConnected { out_dim: 3 });
    specs
}

#[test]
fn stacked_input_with_one_by_one_conv_equals_fused_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let bank = make_bank(Preset::AgeGender);
    for seed in 0..10u64 {
        let img = Image::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let t = stack(&img, &apply_bank(&img, &bank, BorderMode::Replicate)).unwrap();
        let wts = random_weights(&mut rng, 9);

        let plain = Network::new(Shape::new(8, 8, 1), &body(), seed).unwrap();
        let mut gt_specs = vec![LayerSpec::Conv2D { out_channels: 1, kernel_size: 1, stride: 1, pad: 0 }];
        gt_specs.extend(body());
        let mut gt = Network::new(Shape::new(8, 8, 9), &gt_specs, seed + 100).unwrap();
        let mut conv = wts.to_vec();
        conv.push(0.0);
        gt.set_params(0, conv).unwrap();
        for (i, l) in plain.layers().iter().enumerate() {
            gt.set_params(i + 1, l.params().to_vec()).unwrap();
        }

        let fused = fuse(&t, &wts).unwrap();
        let a = gt.predict(&t).unwrap();
        let b = plain.predict(&Tensor::from_image(&fused)).unwrap();
        assert!(max_abs_diff(a.data(), b.data()) <= 1e-10);
    }
}

#[test]
fn fusion_layer_leaves_downstream_initialization_untouched() {
    let mut gf_specs = vec![LayerSpec::Fusion1x1];
    gf_specs.extend(body());
    for seed in [1u64, 2, 99] {
        let gf = Network::new(Shape::new(8, 8, 9), &gf_specs, seed).unwrap();
        let plain = Network::new(Shape::new(8, 8, 1), &body(), seed).unwrap();
        assert_eq!(gf.fusion_weights().unwrap(), FusionWeights::initial(8).to_vec().as_slice());
        for (a, b) in gf.layers()[1..].iter().zip(plain.layers()) {
            assert_eq!(a.params(), b.params());
        }
    }
}

#[test]
fn shape_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let t = random_tensor(&mut rng, 3, 3, 9);
    assert!(fuse(&t, &FusionWeights::initial(3)).is_err());
    let g = Image::filled(2, 3, 1.0).unwrap();
    assert!(fuse_backward(&t, &FusionWeights::initial(8), &g).is_err());
    assert!(FusionWeights::from_slice(&[]).is_err());
    assert!(FusionWeights::new(f64::NAN, vec![]).is_err());
    assert!(Network::new(Shape::new(3, 3, 1), &[LayerSpec::Fusion1x1], 0).is_err());
}
