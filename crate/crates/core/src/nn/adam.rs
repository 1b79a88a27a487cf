use alloc::vec::Vec;

use crate::{Error, Parameter, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub step: u64,
}

impl AdamState {
    pub fn new(shape: &[usize]) -> AdamState {
        AdamState {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `param` from its current gradient.
    pub fn step(&mut self, param: &mut Parameter, config: &AdamConfig) -> Result<()> {
        self.first_moment
            .expect_shape("adam state", param.value.shape())?;
        param.grad.expect_shape("adam grad", param.value.shape())?;
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = 1.0 - libm::pow(config.beta1 as f64, t as f64);
        let c2 = 1.0 - libm::pow(config.beta2 as f64, t as f64);
        let (b1, b2) = (config.beta1, config.beta2);
        let m = self.first_moment.data_mut();
        let v = self.second_moment.data_mut();
        for (((w, &g), m), v) in param
            .value
            .data_mut()
            .iter_mut()
            .zip(param.grad.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m as f64 / c1;
            let v_hat = *v as f64 / c2;
            *w -= (config.lr as f64 * m_hat / (libm::sqrt(v_hat) + config.epsilon as f64)) as f32;
        }
        Ok(())
    }
}

/// Adam over an ordered parameter list; states are matched by position.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Parameter>) -> Adam {
        Adam {
            config,
            states: params
                .into_iter()
                .map(|p| AdamState::new(p.value.shape()))
                .collect(),
        }
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) -> Result<()> {
        let mut count = 0;
        for (state, param) in self.states.iter_mut().zip(params) {
            state.step(param, &self.config)?;
            count += 1;
        }
        if count != self.states.len() {
            return Err(Error::Arity {
                what: "adam parameters",
                expected: self.states.len(),
                actual: count,
            });
        }
        Ok(())
    }
}
