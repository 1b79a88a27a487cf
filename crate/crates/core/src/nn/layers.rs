//! Layers with forward caches and gradient accumulation.
//!
//! [`Layer::forward`] stores whatever the backward pass needs; [`Layer::infer`]
//! is the read-only eval path used for concurrent inference. `backward`
//! accumulates into the layer's parameter gradients and returns the gradient
//! with respect to the layer input.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::ops::{self, Mode};
use crate::{Error, Parameter, Result, Tensor};

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Parameter,
    pub bias: Parameter,
    pub stride: usize,
    pub padding: usize,
    cache: Option<Tensor>,
}

impl Conv2d {
    pub fn new(weight: Parameter, bias: Parameter, stride: usize, padding: usize) -> Conv2d {
        Conv2d {
            weight,
            bias,
            stride,
            padding,
            cache: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new(weight: Parameter, bias: Parameter) -> Linear {
        Linear {
            weight,
            bias,
            cache: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    Relu {
        cache: Option<Tensor>,
    },
    MaxPool2d {
        cache: Option<(Vec<usize>, Vec<usize>)>,
    },
    Dropout {
        rate: f32,
        mask: Option<Option<Vec<f32>>>,
    },
    Flatten {
        cache: Option<Vec<usize>>,
    },
    Linear(Linear),
}

impl Layer {
    pub fn relu() -> Layer {
        Layer::Relu { cache: None }
    }

    pub fn maxpool() -> Layer {
        Layer::MaxPool2d { cache: None }
    }

    pub fn dropout(rate: f32) -> Layer {
        Layer::Dropout { rate, mask: None }
    }

    pub fn flatten() -> Layer {
        Layer::Flatten { cache: None }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu { .. } => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten { .. } => "flatten",
            Layer::Linear(_) => "linear",
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor> {
        match self {
            Layer::Conv2d(c) => {
                let out = ops::conv2d_forward(
                    input,
                    &c.weight.value,
                    &c.bias.value,
                    c.stride,
                    c.padding,
                )?;
                c.cache = Some(input.clone());
                Ok(out)
            }
            Layer::Relu { cache } => {
                *cache = Some(input.clone());
                Ok(ops::relu_forward(input))
            }
            Layer::MaxPool2d { cache } => {
                let (out, argmax) = ops::maxpool2d_forward(input)?;
                *cache = Some((argmax, input.shape().to_vec()));
                Ok(out)
            }
            Layer::Dropout { rate, mask } => {
                let (out, m) = ops::dropout_forward(input, *rate, mode, rng)?;
                *mask = Some(m);
                Ok(out)
            }
            Layer::Flatten { cache } => {
                *cache = Some(input.shape().to_vec());
                input.clone().reshape(&[input.len()])
            }
            Layer::Linear(l) => {
                let out = ops::linear_forward(input, &l.weight.value, &l.bias.value)?;
                l.cache = Some(input.clone());
                Ok(out)
            }
        }
    }

    /// Eval-mode forward without touching any cache.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(c) => {
                ops::conv2d_forward(input, &c.weight.value, &c.bias.value, c.stride, c.padding)
            }
            Layer::Relu { .. } => Ok(ops::relu_forward(input)),
            Layer::MaxPool2d { .. } => ops::maxpool2d_forward(input).map(|(out, _)| out),
            Layer::Dropout { .. } => Ok(input.clone()),
            Layer::Flatten { .. } => input.clone().reshape(&[input.len()]),
            Layer::Linear(l) => ops::linear_forward(input, &l.weight.value, &l.bias.value),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let missing = || Error::InvalidState("backward called without a forward cache");
        match self {
            Layer::Conv2d(c) => {
                let input = c.cache.as_ref().ok_or_else(missing)?;
                let (gi, gw, gb) =
                    ops::conv2d_backward(grad_out, input, &c.weight.value, c.stride, c.padding)?;
                c.weight.grad.add_assign(&gw)?;
                c.bias.grad.add_assign(&gb)?;
                Ok(gi)
            }
            Layer::Relu { cache } => {
                ops::relu_backward(grad_out, cache.as_ref().ok_or_else(missing)?)
            }
            Layer::MaxPool2d { cache } => {
                let (argmax, shape) = cache.as_ref().ok_or_else(missing)?;
                ops::maxpool2d_backward(grad_out, argmax, shape)
            }
            Layer::Dropout { mask, .. } => {
                ops::dropout_backward(grad_out, mask.as_ref().ok_or_else(missing)?.as_deref())
            }
            Layer::Flatten { cache } => grad_out
                .clone()
                .reshape(cache.as_ref().ok_or_else(missing)?),
            Layer::Linear(l) => {
                let input = l.cache.as_ref().ok_or_else(missing)?;
                let (gi, gw, gb) = ops::linear_backward(grad_out, input, &l.weight.value)?;
                l.weight.grad.add_assign(&gw)?;
                l.bias.grad.add_assign(&gb)?;
                Ok(gi)
            }
        }
    }

    /// Drops any forward cache.
    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv2d(c) => c.cache = None,
            Layer::Linear(l) => l.cache = None,
            Layer::Relu { cache } => *cache = None,
            Layer::MaxPool2d { cache } => *cache = None,
            Layer::Dropout { mask, .. } => *mask = None,
            Layer::Flatten { cache } => *cache = None,
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        match self {
            Layer::Conv2d(c) => alloc::vec![&c.weight, &c.bias],
            Layer::Linear(l) => alloc::vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Layer::Conv2d(c) => alloc::vec![&mut c.weight, &mut c.bias],
            Layer::Linear(l) => alloc::vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    /// Shape this layer produces for an input of `shape`, or a shape error.
    pub fn output_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let err = |expected: Vec<usize>| Error::Shape {
            op: self.kind(),
            expected,
            actual: shape.to_vec(),
        };
        match self {
            Layer::Conv2d(c) => {
                let w = c.weight.value.shape();
                let (o, ci, k) = (w[0], w[1], w[2]);
                match *shape {
                    [ch, h, wd] if ch == ci => {
                        match (
                            ops::conv_output_len(h, k, c.stride, c.padding),
                            ops::conv_output_len(wd, k, c.stride, c.padding),
                        ) {
                            (Some(oh), Some(ow)) => Ok(alloc::vec![o, oh, ow]),
                            _ => Err(err(alloc::vec![ci, k, k])),
                        }
                    }
                    _ => Err(err(alloc::vec![ci, 0, 0])),
                }
            }
            Layer::MaxPool2d { .. } => match *shape {
                [c, h, w] if h >= 2 && w >= 2 => Ok(alloc::vec![c, h / 2, w / 2]),
                _ => Err(err(alloc::vec![0, 2, 2])),
            },
            Layer::Relu { .. } | Layer::Dropout { .. } => Ok(shape.to_vec()),
            Layer::Flatten { .. } => Ok(alloc::vec![shape.iter().product()]),
            Layer::Linear(l) => {
                let w = l.weight.value.shape();
                if shape == [w[1]] {
                    Ok(alloc::vec![w[0]])
                } else {
                    Err(err(alloc::vec![w[1]]))
                }
            }
        }
    }
}

/// Checks that `layers` chain from `input` and returns every intermediate
/// shape, starting with `input` itself.
pub fn shape_chain(layers: &[Layer], input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = alloc::vec![input.to_vec()];
    for (i, layer) in layers.iter().enumerate() {
        let next = layer
            .output_shape(shapes.last().expect("non-empty"))
            .map_err(|e| match e {
                Error::Shape {
                    expected, actual, ..
                } => Error::Contract(format!(
                    "layer {i} ({}) cannot accept shape {actual:?}, expected {expected:?}",
                    layer.kind()
                )),
                other => other,
            })?;
        shapes.push(next);
    }
    Ok(shapes)
}
