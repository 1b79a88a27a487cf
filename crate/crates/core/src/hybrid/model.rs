use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::arch::{Architecture, LayerSpec, ModelId};
use super::head::{HeadMode, QuantumHead};
use crate::nn::gradcheck::{central_difference, GradCheckReport};
use crate::nn::{nll_backward, nll_loss, Conv2d, Layer, Linear, Mode};
use crate::{rng, Error, Parameter, Result, Tensor};

/// Initialization seed used by [`build_m1`], [`build_m2`] and [`build_m3`].
pub const DEFAULT_INIT_SEED: u64 = 0;

/// Weights and biases drawn uniformly from `±1/sqrt(fan_in)`.
fn init_param(name: String, shape: &[usize], fan_in: usize, r: &mut impl Rng) -> Parameter {
    let bound = 1.0 / libm::sqrtf(fan_in as f32);
    let n = shape.iter().product();
    let data = (0..n).map(|_| r.random_range(-bound..bound)).collect();
    Parameter::new(
        name,
        Tensor::from_vec(shape, data).expect("shape matches length"),
    )
}

fn build_layer(index: usize, spec: &LayerSpec, seed: u64) -> Layer {
    let mut r = rng::stream(seed, &[index as u64]);
    match *spec {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        } => {
            let fan_in = in_channels * kernel * kernel;
            let w = init_param(
                format!("{index}.weight"),
                &[out_channels, in_channels, kernel, kernel],
                fan_in,
                &mut r,
            );
            let b = init_param(format!("{index}.bias"), &[out_channels], fan_in, &mut r);
            Layer::Conv2d(Conv2d::new(w, b, stride, padding))
        }
        LayerSpec::Linear { inputs, outputs } => {
            let w = init_param(
                format!("{index}.weight"),
                &[outputs, inputs],
                inputs,
                &mut r,
            );
            let b = init_param(format!("{index}.bias"), &[outputs], inputs, &mut r);
            Layer::Linear(Linear::new(w, b))
        }
        LayerSpec::Relu => Layer::relu(),
        LayerSpec::MaxPool2d => Layer::maxpool(),
        LayerSpec::Dropout(rate) => Layer::dropout(rate),
        LayerSpec::Flatten => Layer::flatten(),
    }
}

/// A classical layer stack ending in one unit, feeding the quantum head.
#[derive(Debug, Clone)]
pub struct HybridModel {
    name: String,
    arch: Architecture,
    layers: Vec<Layer>,
    pub head: QuantumHead,
    theta: Option<f64>,
}

pub fn build_m1() -> HybridModel {
    HybridModel::build(ModelId::M1, DEFAULT_INIT_SEED)
}

pub fn build_m2() -> HybridModel {
    HybridModel::build(ModelId::M2, DEFAULT_INIT_SEED)
}

pub fn build_m3() -> HybridModel {
    HybridModel::build(ModelId::M3, DEFAULT_INIT_SEED)
}

impl HybridModel {
    /// Builds and initializes a model. The shape chain is validated here, so
    /// a constructed model cannot shape-fail on inputs of its input shape.
    pub fn new(name: impl Into<String>, arch: Architecture, seed: u64) -> Result<HybridModel> {
        arch.shape_chain()?;
        let layers = arch
            .layers
            .iter()
            .enumerate()
            .map(|(i, spec)| build_layer(i, spec, seed))
            .collect();
        Ok(HybridModel {
            name: name.into(),
            arch,
            layers,
            head: QuantumHead::default(),
            theta: None,
        })
    }

    pub fn build(id: ModelId, seed: u64) -> HybridModel {
        HybridModel::new(id.name(), id.architecture(), seed)
            .expect("built-in architectures are valid")
    }

    pub fn with_head_mode(mut self, mode: HeadMode) -> HybridModel {
        self.head.mode = mode;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.arch.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(Layer::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    pub fn parameter_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(Parameter::zero_grad);
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        image.expect_shape("model input", &self.arch.input)
    }

    fn angle(out: &Tensor) -> f64 {
        out.data()[0] as f64
    }

    /// Forward pass that records caches for [`HybridModel::backward`].
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        image: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<[f64; 2]> {
        self.check_input(image)?;
        let mut x = image.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
        }
        let theta = Self::angle(&x);
        self.theta = Some(theta);
        self.head.forward(theta)
    }

    /// Circuit angle of the most recent [`HybridModel::forward`], including a
    /// non-finite one that made the head reject it.
    pub fn last_angle(&self) -> Option<f64> {
        self.theta
    }

    /// Read-only eval-mode forward.
    pub fn predict(&self, image: &Tensor) -> Result<[f64; 2]> {
        self.check_input(image)?;
        let x = self
            .layers
            .iter()
            .try_fold(image.clone(), |x, l| l.infer(&x))?;
        self.head.forward(Self::angle(&x))
    }

    /// Accumulates parameter gradients for `grad_probs = dL/d[p0, p1]` at the
    /// most recent [`HybridModel::forward`].
    pub fn backward(&mut self, grad_probs: [f64; 2]) -> Result<()> {
        let theta = self.theta.ok_or(Error::InvalidState(
            "model backward called without a forward pass",
        ))?;
        let d_theta = self.head.backward(grad_probs, theta)?;
        let mut grad = Tensor::vector(alloc::vec![d_theta as f32]);
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(())
    }

    /// Forward, negative log-likelihood and backward for one sample; returns
    /// the loss. Gradients accumulate.
    pub fn accumulate_sample<R: Rng + ?Sized>(
        &mut self,
        image: &Tensor,
        target: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<f64> {
        let probs = self.forward(image, mode, rng)?;
        let loss = nll_loss(probs, target)?;
        self.backward(nll_backward(probs, target)?)?;
        Ok(loss)
    }

    /// Compares the analytic gradient of the eval-mode loss for one sample
    /// against central finite differences on every parameter element.
    pub fn grad_check(&mut self, image: &Tensor, target: usize, h: f32) -> Result<GradCheckReport> {
        self.zero_grad();
        let mut unused = rng::stream(0, &[]);
        self.accumulate_sample(image, target, Mode::Eval, &mut unused)?;
        let mut report = GradCheckReport::new();
        for li in 0..self.layers.len() {
            for pi in 0..self.layers[li].params().len() {
                let param = &self.layers[li].params()[pi];
                let name = param.name.clone();
                let analytic: Vec<f64> = param.grad.data().iter().map(|&g| g as f64).collect();
                let mut numeric = Vec::with_capacity(analytic.len());
                for e in 0..analytic.len() {
                    let original = self.layers[li].params()[pi].value.data()[e];
                    numeric.push(central_difference(original, h, |v| {
                        self.layers[li].params_mut()[pi].value.data_mut()[e] = v;
                        nll_loss(self.predict(image)?, target)
                    })?);
                    self.layers[li].params_mut()[pi].value.data_mut()[e] = original;
                }
                report.record(&name, &analytic, &numeric);
            }
        }
        Ok(report)
    }

    /// Parameter values by name, in layer order.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect()
    }

    /// Replaces the value of the named parameter. The shape must match.
    pub fn set_tensor(&mut self, name: &str, value: Tensor) -> Result<()> {
        let param = self
            .params_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Contract(format!("model has no parameter `{name}`")))?;
        value.expect_shape("parameter load", param.value.shape())?;
        param.value = value;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} [{}] {} parameters, head {}",
            self.name,
            self.arch,
            self.parameter_count(),
            self.head.mode
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy_arch() -> Architecture {
        "1x4x4;conv(1,2,3,1,1);relu;maxpool;flatten;linear(8,3);relu;linear(3,1)"
            .parse()
            .unwrap()
    }

    fn image(shape: [usize; 3], seed: u64) -> Tensor {
        let mut r = rng::stream(seed, &[]);
        let n = shape.iter().product();
        Tensor::from_vec(&shape, (0..n).map(|_| r.random::<f32>()).collect()).unwrap()
    }

    #[test]
    fn builds_are_deterministic() {
        let a = build_m2();
        let b = build_m2();
        assert_eq!(a.parameter_count(), b.parameter_count());
        assert_eq!(a.named_tensors(), b.named_tensors());
        assert_ne!(
            HybridModel::build(ModelId::M2, 1).named_tensors(),
            a.named_tensors()
        );
    }

    #[test]
    fn parameter_counts() {
        // conv 3*10*25+10, conv 10*20*25+20, fc 500*500+500, fc 500+1
        assert_eq!(build_m1().parameter_count(), 760 + 5020 + 250_500 + 501);
        // conv 456, conv 2416, fc 48120, fc 10164, fc 85
        assert_eq!(
            build_m2().parameter_count(),
            456 + 2416 + 48_120 + 10_164 + 85
        );
    }

    #[test]
    fn forward_is_normalized_and_eval_is_deterministic() {
        let mut model = build_m1();
        let x = image([3, 32, 32], 4);
        let mut r = rng::stream(1, &[]);
        let p = model.forward(&x, Mode::Eval, &mut r).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        assert_eq!(p, model.forward(&x, Mode::Eval, &mut r).unwrap());
        assert_eq!(p, model.predict(&x).unwrap());
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let model = build_m2();
        assert!(matches!(
            model.predict(&Tensor::zeros(&[3, 28, 28])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn backward_requires_forward() {
        let mut model = HybridModel::new("toy", toy_arch(), 0).unwrap();
        assert!(matches!(
            model.backward([0.0, -1.0]),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn toy_model_gradients_match_finite_differences() {
        let mut model = HybridModel::new("toy", toy_arch(), 3).unwrap();
        let x = image([1, 4, 4], 8);
        let report = model.grad_check(&x, 1, 1e-3).unwrap();
        assert!(report.max_relative_error < 1e-2, "{report:?}");
    }

    #[test]
    fn every_trainable_layer_gets_gradient() {
        let mut model = HybridModel::new("toy", toy_arch(), 5).unwrap();
        let x = image([1, 4, 4], 6);
        let mut r = rng::stream(0, &[]);
        model.accumulate_sample(&x, 0, Mode::Train, &mut r).unwrap();
        for layer in model.layers() {
            for p in layer.params() {
                assert!(
                    p.grad.data().iter().any(|&g| g != 0.0),
                    "{} has zero grad",
                    p.name
                );
            }
        }
    }

    #[test]
    fn set_tensor_checks_name_and_shape() {
        let mut model = HybridModel::new("toy", toy_arch(), 0).unwrap();
        assert!(model.set_tensor("0.bias", Tensor::zeros(&[2])).is_ok());
        assert!(model.set_tensor("0.bias", Tensor::zeros(&[3])).is_err());
        assert!(model.set_tensor("9.bias", Tensor::zeros(&[2])).is_err());
        assert_eq!(
            model.params().next().map(|p| p.name.as_str()),
            Some("0.weight")
        );
        let names: Vec<_> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            vec!["0.weight", "0.bias", "4.weight", "4.bias", "6.weight", "6.bias"]
        );
    }
}
