use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamSet};
use super::tensor::Tensor;
use super::NumError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> AdamState {
        let zeros = || params.iter().map(|(_, _, p)| Tensor::zeros(p.rows(), p.cols())).collect();
        AdamState { config, m: zeros(), v: zeros(), t: 0 }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<(), NumError> {
        if grads.tensors().len() != params.len() || self.m.len() != params.len() {
            return Err(NumError::Shape("adam: parameter count mismatch".into()));
        }
        for (id, g) in params.ids().zip(grads.tensors()) {
            if g.shape() != params.get(id).shape() {
                return Err(NumError::Shape(format!("adam: gradient for {} has shape {:?}", params.name(id), g.shape())));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads.tensors()[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.get_mut(id).data_mut();
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
