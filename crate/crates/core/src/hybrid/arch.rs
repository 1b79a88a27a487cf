//! Layer-stack descriptions and the three built-in model architectures.
//!
//! An [`Architecture`] has a compact text form, stored in checkpoints, e.g.
//! `3x32x32;conv(3,6,5,1,0);relu;maxpool;flatten;linear(1176,1)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::nn::ops::conv_output_len;
use crate::{Error, Result};

/// Default dropout rate where a model uses dropout.
pub const DEFAULT_DROPOUT: f32 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    M1,
    M2,
    M3,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::M1, ModelId::M2, ModelId::M3];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::M1 => "m1",
            ModelId::M2 => "m2",
            ModelId::M3 => "m3",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            ModelId::M1 => Architecture::m1(),
            ModelId::M2 => Architecture::m2(),
            ModelId::M3 => Architecture::m3(),
        }
    }

    /// Square input side length.
    pub fn image_size(self) -> usize {
        match self {
            ModelId::M1 | ModelId::M2 => 32,
            ModelId::M3 => 250,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelId::M1),
            "m2" => Ok(ModelId::M2),
            "m3" => Ok(ModelId::M3),
            _ => Err(Error::Parse(format!("model `{s}`, expected m1, m2 or m3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2d,
    Dropout(f32),
    Flatten,
    Linear {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> LayerSpec {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn linear(inputs: usize, outputs: usize) -> LayerSpec {
        LayerSpec::Linear { inputs, outputs }
    }

    pub fn output_shape(&self, shape: &[usize]) -> Option<Vec<usize>> {
        match (*self, shape) {
            (
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                },
                &[c, h, w],
            ) if c == in_channels => Some(vec![
                out_channels,
                conv_output_len(h, kernel, stride, padding)?,
                conv_output_len(w, kernel, stride, padding)?,
            ]),
            (LayerSpec::MaxPool2d, &[c, h, w]) if h >= 2 && w >= 2 => Some(vec![c, h / 2, w / 2]),
            (LayerSpec::Relu, s) => Some(s.to_vec()),
            (LayerSpec::Dropout(rate), s) if (0.0..1.0).contains(&rate) => Some(s.to_vec()),
            (LayerSpec::Flatten, s) => Some(vec![s.iter().product()]),
            (LayerSpec::Linear { inputs, outputs }, &[n]) if n == inputs => Some(vec![outputs]),
            _ => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(
                f,
                "conv({in_channels},{out_channels},{kernel},{stride},{padding})"
            ),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool2d => f.write_str("maxpool"),
            LayerSpec::Dropout(rate) => write!(f, "dropout({rate})"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Linear { inputs, outputs } => write!(f, "linear({inputs},{outputs})"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("layer `{s}`"));
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => (name, Some(rest.strip_suffix(')').ok_or_else(bad)?)),
            None => (s, None),
        };
        let ints = |args: Option<&str>| -> Result<Vec<usize>> {
            args.ok_or_else(bad)?
                .split(',')
                .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
                .collect()
        };
        match (name.trim(), args) {
            ("relu", None) => Ok(LayerSpec::Relu),
            ("maxpool", None) => Ok(LayerSpec::MaxPool2d),
            ("flatten", None) => Ok(LayerSpec::Flatten),
            ("dropout", Some(a)) => a.trim().parse().map(LayerSpec::Dropout).map_err(|_| bad()),
            ("conv", a) => match ints(a)?[..] {
                [i, o, k, st, p] => Ok(LayerSpec::conv(i, o, k, st, p)),
                _ => Err(bad()),
            },
            ("linear", a) => match ints(a)?[..] {
                [i, o] => Ok(LayerSpec::linear(i, o)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Input shape plus an ordered classical layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// 3x32x32 -> conv(3->10, k5) -> relu -> pool -> conv(10->20, k5) -> relu
    /// -> pool -> dropout -> flatten(500) -> linear(500->500) -> relu ->
    /// linear(500->1).
    pub fn m1() -> Architecture {
        use LayerSpec::*;
        Architecture {
            input: [3, 32, 32],
            layers: vec![
                LayerSpec::conv(3, 10, 5, 1, 0),
                Relu,
                MaxPool2d,
                LayerSpec::conv(10, 20, 5, 1, 0),
                Relu,
                MaxPool2d,
                Dropout(DEFAULT_DROPOUT),
                Flatten,
                LayerSpec::linear(500, 500),
                Relu,
                LayerSpec::linear(500, 1),
            ],
        }
    }

    /// LeNet-style stack without dropout: 400 -> 120 -> 84 -> 1.
    pub fn m2() -> Architecture {
        use LayerSpec::*;
        Architecture {
            input: [3, 32, 32],
            layers: vec![
                LayerSpec::conv(3, 6, 5, 1, 0),
                Relu,
                MaxPool2d,
                LayerSpec::conv(6, 16, 5, 1, 0),
                Relu,
                MaxPool2d,
                Flatten,
                LayerSpec::linear(400, 120),
                Relu,
                LayerSpec::linear(120, 84),
                Relu,
                LayerSpec::linear(84, 1),
            ],
        }
    }

    /// 3x250x250 with two stride-2 convolutions (the first padded by 2),
    /// dropout after each, flattening to 15*61*61 = 55815 features.
    ///
    /// Only the 55815/120/84 widths, the padding and the stride are fixed;
    /// the channel counts and kernel sizes are a
    /// reconstruction that reproduces the flatten width.
    pub fn m3() -> Architecture {
        use LayerSpec::*;
        Architecture {
            input: [3, 250, 250],
            layers: vec![
                LayerSpec::conv(3, 6, 5, 2, 2),
                Relu,
                Dropout(DEFAULT_DROPOUT),
                LayerSpec::conv(6, 15, 5, 2, 0),
                Relu,
                Dropout(DEFAULT_DROPOUT),
                Flatten,
                LayerSpec::linear(55815, 120),
                Relu,
                LayerSpec::linear(120, 84),
                Relu,
                LayerSpec::linear(84, 1),
            ],
        }
    }

    /// Shapes after every layer, starting with the input. Fails if any layer
    /// cannot accept its input or the stack does not end in a single unit.
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = shapes.last().expect("non-empty");
            let next = layer.output_shape(prev).ok_or_else(|| {
                Error::Contract(format!("layer {i} `{layer}` cannot accept shape {prev:?}"))
            })?;
            shapes.push(next);
        }
        if shapes.last().map(Vec::as_slice) != Some(&[1][..]) {
            return Err(Error::Contract(format!(
                "classical stack must end in one unit, ends in {:?}",
                shapes.last()
            )));
        }
        Ok(shapes)
    }

    /// Width of the flattened feature vector, if the stack flattens.
    pub fn flatten_size(&self) -> Option<usize> {
        let shapes = self.shape_chain().ok()?;
        let at = self.layers.iter().position(|l| *l == LayerSpec::Flatten)?;
        Some(shapes[at + 1][0])
    }

    /// Widths `inputs -> outputs` of the fully connected layers, in order,
    /// e.g. `[400, 120, 84, 1]` for M2.
    pub fn dense_widths(&self) -> Vec<usize> {
        let mut widths = Vec::new();
        for l in &self.layers {
            if let LayerSpec::Linear { inputs, outputs } = *l {
                if widths.is_empty() {
                    widths.push(inputs);
                }
                widths.push(outputs);
            }
        }
        widths
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.input;
        write!(f, "{c}x{h}x{w}")?;
        for l in &self.layers {
            write!(f, ";{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let input = parts.next().unwrap_or_default();
        let dims: Vec<usize> = input
            .split('x')
            .map(|d| {
                d.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("input shape `{input}`")))
            })
            .collect::<Result<_>>()?;
        let [c, h, w] = dims[..] else {
            return Err(Error::Parse(format!("input shape `{input}` is not CxHxW")));
        };
        let layers = parts.map(str::parse).collect::<Result<Vec<LayerSpec>>>()?;
        Ok(Architecture {
            input: [c, h, w],
            layers,
        })
    }
}

impl From<ModelId> for Architecture {
    fn from(id: ModelId) -> Self {
        id.architecture()
    }
}
