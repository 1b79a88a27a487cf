//! Central finite-difference verification of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::Layer;
use super::ops::Mode;
use crate::{rng, Result, Tensor};

/// Normwise relative error of a gradient tensor:
/// `max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|)`.
///
/// Finite differences of an `f32` forward pass carry absolute noise of
/// roughly `ulp(output) / h`, so a per-element ratio is meaningless for
/// entries much smaller than the tensor's largest entry; the error is
/// therefore measured against the tensor's scale.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Name of the tensor with the largest error, e.g. `"0.weight"` or `"input"`.
    pub worst: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub(crate) fn new() -> Self {
        GradCheckReport {
            max_relative_error: 0.0,
            worst: String::new(),
            checked: 0,
        }
    }

    pub(crate) fn record(&mut self, name: &str, analytic: &[f64], numeric: &[f64]) {
        let err = relative_error(analytic, numeric);
        self.checked += analytic.len();
        if err > self.max_relative_error || self.worst.is_empty() {
            self.max_relative_error = err;
            self.worst = String::from(name);
        }
    }
}

fn infer_all(layers: &[Layer], input: &Tensor) -> Result<Tensor> {
    layers.iter().try_fold(input.clone(), |x, l| l.infer(&x))
}

fn objective(out: &Tensor, projection: &[f64]) -> f64 {
    out.data()
        .iter()
        .zip(projection)
        .map(|(&o, &r)| o as f64 * r)
        .sum()
}

/// Derivative estimate from perturbing `*slot` by `±h`, dividing by the
/// perturbation actually representable in `f32`.
pub(crate) fn central_difference(
    slot_value: f32,
    h: f32,
    mut eval: impl FnMut(f32) -> Result<f64>,
) -> Result<f64> {
    let (up, down) = (slot_value + h, slot_value - h);
    let (f_up, f_down) = (eval(up)?, eval(down)?);
    Ok((f_up - f_down) / (up as f64 - down as f64))
}

/// Checks the analytic backward pass of a layer stack against central
/// finite differences of the scalar objective `sum_i r_i * out_i`, where `r`
/// is a fixed random projection drawn from `seed`. Every parameter element
/// and every input element is perturbed. The stack must be deterministic in
/// eval mode, which dropout is.
pub fn grad_check(
    layers: &mut [Layer],
    input: &Tensor,
    h: f32,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut r = rng::stream(seed, &[0x6772_6164]);
    let mut x = input.clone();
    for layer in layers.iter_mut() {
        for p in layer.params_mut() {
            p.zero_grad();
        }
        x = layer.forward(&x, Mode::Eval, &mut r)?;
    }
    let projection: Vec<f64> = (0..x.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut grad = Tensor::from_vec(x.shape(), projection.iter().map(|&v| v as f32).collect())?;
    for layer in layers.iter_mut().rev() {
        grad = layer.backward(&grad)?;
    }
    let input_grad = grad;
    // the analytic path used the f32-rounded projection
    let projection: Vec<f64> = projection.iter().map(|&v| v as f32 as f64).collect();

    let mut report = GradCheckReport::new();
    for li in 0..layers.len() {
        for pi in 0..layers[li].params().len() {
            let n = layers[li].params()[pi].value.len();
            let analytic: Vec<f64> = layers[li].params()[pi]
                .grad
                .data()
                .iter()
                .map(|&g| g as f64)
                .collect();
            let mut numeric = Vec::with_capacity(n);
            for e in 0..n {
                let original = layers[li].params()[pi].value.data()[e];
                numeric.push(central_difference(original, h, |v| {
                    layers[li].params_mut()[pi].value.data_mut()[e] = v;
                    infer_all(layers, input).map(|out| objective(&out, &projection))
                })?);
                layers[li].params_mut()[pi].value.data_mut()[e] = original;
            }
            let name = layers[li].params()[pi].name.clone();
            report.record(&name, &analytic, &numeric);
        }
    }
    let mut probe = input.clone();
    let mut numeric = Vec::with_capacity(input.len());
    for e in 0..input.len() {
        let original = input.data()[e];
        numeric.push(central_difference(original, h, |v| {
            probe.data_mut()[e] = v;
            infer_all(layers, &probe).map(|out| objective(&out, &projection))
        })?);
        probe.data_mut()[e] = original;
    }
    let analytic: Vec<f64> = input_grad.data().iter().map(|&g| g as f64).collect();
    report.record("input", &analytic, &numeric);
    Ok(report)
}
