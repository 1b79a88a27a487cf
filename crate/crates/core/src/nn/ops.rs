//! Stateless forward and backward kernels for the supported layer kinds.
//!
//! Feature maps are `C x H x W`, convolution weights are `O x C x K x K`,
//! linear weights are `outputs x inputs`. Convolution is a direct
//! cross-correlation, which is what every deep learning toolkit calls
//! "convolution".

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result, Tensor};

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Output length of a convolution along one axis, if the kernel fits.
pub fn conv_output_len(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output positions `o` along one axis for which `o*stride + k - padding`
/// falls inside `[0, input)`.
fn valid_range(
    k: usize,
    stride: usize,
    padding: usize,
    input: usize,
    output: usize,
) -> (usize, usize) {
    let lo = if padding > k {
        (padding - k).div_ceil(stride)
    } else {
        0
    };
    let hi = (input + padding)
        .saturating_sub(k)
        .div_ceil(stride)
        .min(output);
    (lo, hi.max(lo))
}

fn dims3(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::Shape {
            op,
            expected: vec![0, 0, 0],
            actual: t.shape().to_vec(),
        }),
    }
}

struct ConvGeometry {
    channels: usize,
    height: usize,
    width: usize,
    filters: usize,
    kernel: usize,
    out_h: usize,
    out_w: usize,
}

fn conv_geometry(
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<ConvGeometry> {
    let (channels, height, width) = dims3(input, "conv2d input")?;
    let [filters, wc, kh, kw] = *weight.shape() else {
        return Err(Error::Shape {
            op: "conv2d weight",
            expected: vec![0, channels, 0, 0],
            actual: weight.shape().to_vec(),
        });
    };
    if wc != channels || kh != kw {
        return Err(Error::Shape {
            op: "conv2d weight/input channels",
            expected: vec![filters, channels, kh, kh],
            actual: weight.shape().to_vec(),
        });
    }
    let (Some(out_h), Some(out_w)) = (
        conv_output_len(height, kh, stride, padding),
        conv_output_len(width, kh, stride, padding),
    ) else {
        return Err(Error::Shape {
            op: "conv2d kernel larger than padded input",
            expected: vec![channels, kh, kh],
            actual: input.shape().to_vec(),
        });
    };
    Ok(ConvGeometry {
        channels,
        height,
        width,
        filters,
        kernel: kh,
        out_h,
        out_w,
    })
}

pub fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = conv_geometry(input, weight, stride, padding)?;
    bias.expect_shape("conv2d bias", &[g.filters])?;
    let (x, w) = (input.data(), weight.data());
    let plane = g.out_h * g.out_w;
    let mut out = vec![0.0f32; g.filters * plane];
    for o in 0..g.filters {
        let out_o = &mut out[o * plane..(o + 1) * plane];
        out_o.iter_mut().for_each(|v| *v = bias.data()[o]);
        for c in 0..g.channels {
            let x_c = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
            for ky in 0..g.kernel {
                let (oy_lo, oy_hi) = valid_range(ky, stride, padding, g.height, g.out_h);
                for kx in 0..g.kernel {
                    let wv = w[((o * g.channels + c) * g.kernel + ky) * g.kernel + kx];
                    let (ox_lo, ox_hi) = valid_range(kx, stride, padding, g.width, g.out_w);
                    for oy in oy_lo..oy_hi {
                        let iy = oy * stride + ky - padding;
                        let row = &x_c[iy * g.width..(iy + 1) * g.width];
                        let dst = &mut out_o[oy * g.out_w..(oy + 1) * g.out_w];
                        if stride == 1 {
                            let src = &row[ox_lo + kx - padding..ox_hi + kx - padding];
                            for (d, s) in dst[ox_lo..ox_hi].iter_mut().zip(src) {
                                *d += wv * s;
                            }
                        } else {
                            for ox in ox_lo..ox_hi {
                                dst[ox] += wv * row[ox * stride + kx - padding];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[g.filters, g.out_h, g.out_w], out)
}

/// Gradients of a convolution with respect to `(input, weight, bias)`.
pub fn conv2d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = conv_geometry(input, weight, stride, padding)?;
    grad_out.expect_shape("conv2d grad_out", &[g.filters, g.out_h, g.out_w])?;
    let (x, w, go) = (input.data(), weight.data(), grad_out.data());
    let plane = g.out_h * g.out_w;
    let mut gi = vec![0.0f32; x.len()];
    let mut gw = vec![0.0f32; w.len()];
    let mut gb = vec![0.0f32; g.filters];
    for o in 0..g.filters {
        let go_o = &go[o * plane..(o + 1) * plane];
        gb[o] = go_o.iter().sum();
        for c in 0..g.channels {
            let base = c * g.height * g.width;
            for ky in 0..g.kernel {
                let (oy_lo, oy_hi) = valid_range(ky, stride, padding, g.height, g.out_h);
                for kx in 0..g.kernel {
                    let widx = ((o * g.channels + c) * g.kernel + ky) * g.kernel + kx;
                    let wv = w[widx];
                    let (ox_lo, ox_hi) = valid_range(kx, stride, padding, g.width, g.out_w);
                    let mut acc = 0.0f32;
                    for oy in oy_lo..oy_hi {
                        let row = base + (oy * stride + ky - padding) * g.width;
                        let grow = &go_o[oy * g.out_w..(oy + 1) * g.out_w];
                        for (ox, &g_out) in grow.iter().enumerate().take(ox_hi).skip(ox_lo) {
                            let xi = row + ox * stride + kx - padding;
                            acc += g_out * x[xi];
                            gi[xi] += wv * g_out;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(input.shape(), gi)?,
        Tensor::from_vec(weight.shape(), gw)?,
        Tensor::from_vec(&[g.filters], gb)?,
    ))
}

/// 2x2 max pooling with stride 2. Returns the pooled map and, for every
/// output element, the flat input index of the maximum that was selected
/// (the first maximal element in row-major window order; a NaN wins).
pub fn maxpool2d_forward(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (c, h, w) = dims3(input, "maxpool2d input")?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::Shape {
            op: "maxpool2d input smaller than window",
            expected: vec![c, 2, 2],
            actual: input.shape().to_vec(),
        });
    }
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ch * h + 2 * oy) * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] || (x[idx].is_nan() && !x[best].is_nan()) {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[c, oh, ow], out)?, argmax))
}

pub fn maxpool2d_backward(
    grad_out: &Tensor,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::Shape {
            op: "maxpool2d grad_out",
            expected: vec![argmax.len()],
            actual: grad_out.shape().to_vec(),
        });
    }
    let mut gi = Tensor::zeros(input_shape);
    let dst = gi.data_mut();
    for (&g, &idx) in grad_out.data().iter().zip(argmax) {
        dst[idx] += g;
    }
    Ok(gi)
}

/// NaN inputs propagate.
pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .filter(|x| **x < 0.0)
        .for_each(|x| *x = 0.0);
    out
}

/// The derivative at exactly zero is taken to be zero.
pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape("relu grad_out", input.shape())?;
    let mut gi = grad_out.clone();
    for (g, &x) in gi.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(gi)
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; the returned mask holds
/// the per-element multiplier. Eval mode is the identity and returns no mask.
pub fn dropout_forward<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f32,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor, Option<Vec<f32>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(alloc::format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if mode == Mode::Eval {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f32> = (0..input.len())
        .map(|_| {
            if rng.random::<f32>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let mut out = input.clone();
    for (x, m) in out.data_mut().iter_mut().zip(&mask) {
        *x *= m;
    }
    Ok((out, Some(mask)))
}

pub fn dropout_backward(grad_out: &Tensor, mask: Option<&[f32]>) -> Result<Tensor> {
    let mut gi = grad_out.clone();
    if let Some(mask) = mask {
        if mask.len() != gi.len() {
            return Err(Error::Shape {
                op: "dropout grad_out",
                expected: vec![mask.len()],
                actual: grad_out.shape().to_vec(),
            });
        }
        for (g, m) in gi.data_mut().iter_mut().zip(mask) {
            *g *= m;
        }
    }
    Ok(gi)
}

fn linear_dims(input: &Tensor, weight: &Tensor) -> Result<(usize, usize)> {
    let [m, n] = *weight.shape() else {
        return Err(Error::Shape {
            op: "linear weight",
            expected: vec![0, input.len()],
            actual: weight.shape().to_vec(),
        });
    };
    input.expect_shape("linear input", &[n])?;
    Ok((m, n))
}

/// `W x + b`.
pub fn linear_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = linear_dims(input, weight)?;
    bias.expect_shape("linear bias", &[m])?;
    let x = input.data();
    let out = weight
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f32>())
        .collect();
    Ok(Tensor::vector(out))
}

/// Gradients of a linear map with respect to `(input, weight, bias)`.
pub fn linear_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (m, n) = linear_dims(input, weight)?;
    grad_out.expect_shape("linear grad_out", &[m])?;
    let (x, go) = (input.data(), grad_out.data());
    let mut gi = vec![0.0f32; n];
    let mut gw = vec![0.0f32; m * n];
    for ((row, grow), &g) in weight
        .data()
        .chunks_exact(n)
        .zip(gw.chunks_exact_mut(n))
        .zip(go)
    {
        for j in 0..n {
            gi[j] += row[j] * g;
            grow[j] = g * x[j];
        }
    }
    Ok((
        Tensor::vector(gi),
        Tensor::from_vec(&[m, n], gw)?,
        grad_out.clone(),
    ))
}
