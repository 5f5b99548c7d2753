//! Adam with bias correction. One state instance tracks the moments of a
//! fixed parameter list, matched by position.

use alloc::vec::Vec;

use super::{Parameter, Tensor};

#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[&Parameter], learning_rate: f32) -> AdamState {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Bias-corrected update from the accumulated gradients, which are
    /// zeroed afterwards. `params` must match the construction list.
    pub fn step(&mut self, params: &mut [&mut Parameter]) {
        assert_eq!(params.len(), self.m.len(), "parameter list changed size");
        self.step += 1;
        let b1t = 1.0 - libm::powf(self.beta1, self.step as f32);
        let b2t = 1.0 - libm::powf(self.beta2, self.step as f32);
        for (i, p) in params.iter_mut().enumerate() {
            debug_assert_eq!(p.value.shape(), self.m[i].shape(), "moment shape drifted");
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let g = p.grad.data();
            let w = p.value.data_mut();
            for j in 0..w.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mhat = m[j] / b1t;
                let vhat = v[j] / b2t;
                w[j] -= self.learning_rate * mhat / (libm::sqrtf(vhat) + self.epsilon);
            }
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_step_matches_bias_corrected_formula() {
        let mut p = Parameter::new("w", Tensor::from_vec(&[1], vec![0.0]));
        p.grad.data_mut()[0] = 1.0;
        let mut adam = AdamState::new(&[&p], 3e-4);
        adam.step(&mut [&mut p]);
        // mhat = 1, vhat = 1 => update = -lr / (1 + eps).
        let expected = -3e-4f32 / (1.0 + 1e-8);
        assert!((p.value.data()[0] - expected).abs() < 1e-9);
        assert_eq!(p.grad.data()[0], 0.0, "gradients zeroed after the step");
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut p = Parameter::new("w", Tensor::from_vec(&[2], vec![0.7, -0.3]));
        let mut adam = AdamState::new(&[&p], 1e-2);
        for _ in 0..5 {
            adam.step(&mut [&mut p]);
        }
        assert_eq!(p.value.data(), &[0.7, -0.3]);
    }

    #[test]
    fn converges_on_a_convex_quadratic() {
        // f(w) = (w - 3)^2, df/dw = 2 (w - 3).
        let mut p = Parameter::new("w", Tensor::from_vec(&[1], vec![0.0]));
        let mut adam = AdamState::new(&[&p], 0.1);
        for _ in 0..200 {
            let w = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * (w - 3.0);
            adam.step(&mut [&mut p]);
        }
        assert!((p.value.data()[0] - 3.0).abs() < 0.1, "w = {}", p.value.data()[0]);
    }
}
