//! Finite-difference checks of every layer kind on random instances.

use hqcnn_core::nn::{grad_check, Conv2d, Layer, Linear};
use hqcnn_core::{rng, Parameter, Tensor};
use rand::Rng;

const H: f32 = 1e-3;
const TOLERANCE: f64 = 1e-3;
const INSTANCES: u64 = 20;

fn uniform(shape: &[usize], r: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect(),
    )
    .unwrap()
}

/// Values in `[-1, -0.1] U [0.1, 1]`, clear of the ReLU kink.
fn away_from_zero(shape: &[usize], r: &mut impl Rng) -> Tensor {
    let mut t = uniform(shape, r);
    for v in t.data_mut() {
        *v = v.signum() * (0.1 + 0.9 * v.abs());
    }
    t
}

/// Distinct values at least 0.01 apart, so no pooling window has a near tie.
fn distinct(shape: &[usize], r: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut values: Vec<f32> = (0..n).map(|i| -1.0 + 2.0 * i as f32 / n as f32).collect();
    for i in (1..n).rev() {
        values.swap(i, r.random_range(0..=i));
    }
    Tensor::from_vec(shape, values).unwrap()
}

fn conv(r: &mut impl Rng, c: usize, o: usize, k: usize, stride: usize, padding: usize) -> Layer {
    Layer::Conv2d(Conv2d::new(
        Parameter::new("w", uniform(&[o, c, k, k], r)),
        Parameter::new("b", uniform(&[o], r)),
        stride,
        padding,
    ))
}

fn linear(r: &mut impl Rng, n: usize, m: usize) -> Layer {
    Layer::Linear(Linear::new(
        Parameter::new("w", uniform(&[m, n], r)),
        Parameter::new("b", uniform(&[m], r)),
    ))
}

fn worst(mut case: impl FnMut(u64) -> f64) -> f64 {
    (0..INSTANCES).map(&mut case).fold(0.0, f64::max)
}

#[test]
fn conv2d_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[1]);
        let (stride, padding) = [(1, 0), (1, 1), (2, 0), (2, 2)][seed as usize % 4];
        let mut layers = vec![conv(&mut r, 2, 3, 3, stride, padding)];
        let x = uniform(&[2, 6, 6], &mut r);
        grad_check(&mut layers, &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("conv2d: {err:.2e}");
    assert!(err < TOLERANCE, "conv2d max relative error {err}");
}

#[test]
fn linear_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[2]);
        let mut layers = vec![linear(&mut r, 12, 5)];
        let x = uniform(&[12], &mut r);
        grad_check(&mut layers, &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("linear: {err:.2e}");
    assert!(err < TOLERANCE, "linear max relative error {err}");
}

#[test]
fn relu_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[3]);
        let x = away_from_zero(&[3, 4, 4], &mut r);
        grad_check(&mut [Layer::relu()], &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("relu: {err:.2e}");
    assert!(err < TOLERANCE, "relu max relative error {err}");
}

#[test]
fn maxpool_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[4]);
        let x = distinct(&[2, 6, 6], &mut r);
        grad_check(&mut [Layer::maxpool()], &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("maxpool: {err:.2e}");
    assert!(err < TOLERANCE, "maxpool max relative error {err}");
}

#[test]
fn dropout_and_flatten_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[5]);
        let x = uniform(&[2, 3, 3], &mut r);
        let mut layers = [Layer::dropout(0.25), Layer::flatten()];
        grad_check(&mut layers, &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("dropout/flatten: {err:.2e}");
    assert!(err < TOLERANCE, "dropout/flatten max relative error {err}");
}

#[test]
fn conv_block_gradients() {
    let err = worst(|seed| {
        let mut r = rng::stream(seed, &[6]);
        let mut layers = vec![
            conv(&mut r, 1, 2, 3, 1, 1),
            Layer::flatten(),
            linear(&mut r, 32, 3),
        ];
        let x = uniform(&[1, 4, 4], &mut r);
        grad_check(&mut layers, &x, H, seed)
            .unwrap()
            .max_relative_error
    });
    eprintln!("conv block: {err:.2e}");
    assert!(err < TOLERANCE, "conv block max relative error {err}");
}
