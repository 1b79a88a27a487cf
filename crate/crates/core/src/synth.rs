//! Seeded synthetic two-class image generator used as a stand-in dataset.
//!
//! Benign images are sums of a few wide Gaussian blobs; malignant images are
//! high-frequency oriented gratings mixed with pixel noise. Both classes draw
//! their mean brightness from the same range, so the per-image pixel mean
//! carries no class information, while a small convolution picks up local
//! contrast immediately.

use alloc::vec::Vec;
use core::f32::consts::PI;

use rand::Rng;

use crate::{rng, Class, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub image: Tensor,
    pub class: Class,
}

fn normalize_into(raw: &[f32], mean: f32, amplitude: f32, tint: [f32; 3], size: usize) -> Tensor {
    let n = raw.len() as f32;
    let m = raw.iter().sum::<f32>() / n;
    let spread = raw
        .iter()
        .map(|v| (v - m).abs())
        .fold(0.0f32, f32::max)
        .max(1e-6);
    let mut data = Vec::with_capacity(3 * raw.len());
    for t in tint {
        data.extend(
            raw.iter()
                .map(|v| (mean + amplitude * t * (v - m) / spread).clamp(0.0, 1.0)),
        );
    }
    Tensor::from_vec(&[3, size, size], data).expect("3 x size x size")
}

fn blobs(size: usize, r: &mut impl Rng) -> Vec<f32> {
    let count = r.random_range(2..=4);
    let centers: Vec<(f32, f32, f32, f32)> = (0..count)
        .map(|_| {
            let s = size as f32;
            (
                r.random_range(0.0..s),
                r.random_range(0.0..s),
                r.random_range(0.25..0.5) * s,
                r.random_range(-1.0f32..1.0),
            )
        })
        .collect();
    (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f32, (i % size) as f32);
            centers
                .iter()
                .map(|&(cy, cx, w, a)| {
                    let d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    a * libm::expf(-d2 / (2.0 * w * w))
                })
                .sum()
        })
        .collect()
}

fn texture(size: usize, r: &mut impl Rng) -> Vec<f32> {
    let angle = r.random_range(0.0..PI);
    let period = r.random_range(2.0f32..3.5);
    let phase = r.random_range(0.0..2.0 * PI);
    let (fy, fx) = (
        libm::sinf(angle) * 2.0 * PI / period,
        libm::cosf(angle) * 2.0 * PI / period,
    );
    (0..size * size)
        .map(|i| {
            let (y, x) = ((i / size) as f32, (i % size) as f32);
            libm::sinf(fy * y + fx * x + phase) + 0.5 * r.random_range(-1.0f32..1.0)
        })
        .collect()
}

/// One image of `class`, fully determined by `(seed, class, index)`.
pub fn synthesize_image(class: Class, index: usize, seed: u64, size: usize) -> Tensor {
    let mut r = rng::stream(seed, &[0x73796e, class.index() as u64, index as u64]);
    let mean = r.random_range(0.35f32..0.65);
    let amplitude = r.random_range(0.2f32..0.3);
    let tint = [
        r.random_range(0.7f32..1.0),
        r.random_range(0.7f32..1.0),
        r.random_range(0.7f32..1.0),
    ];
    let raw = match class {
        Class::Benign => blobs(size, &mut r),
        Class::Malignant => texture(size, &mut r),
    };
    normalize_into(&raw, mean, amplitude, tint, size)
}

/// `n_per_class` benign images followed by `n_per_class` malignant ones.
pub fn synthesize_dataset(n_per_class: usize, seed: u64, size: usize) -> Vec<SyntheticSample> {
    Class::ALL
        .into_iter()
        .flat_map(|class| {
            (0..n_per_class).map(move |i| SyntheticSample {
                image: synthesize_image(class, i, seed, size),
                class,
            })
        })
        .collect()
}
