//! Weight initialization. Kaiming-uniform with fan-in scaling for conv and
//! dense weights, 0.02-scaled normal for embeddings, zeros for biases.

use super::Tensor;
use crate::rng::Rng;

/// Uniform in `[-b, b]` with `b = sqrt(3) * sqrt(2 / fan_in)`.
pub fn kaiming_uniform(rng: &mut Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = libm::sqrtf(3.0) * libm::sqrtf(2.0 / fan_in as f32);
    let mut t = Tensor::zeros(shape);
    t.data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.uniform(-bound, bound));
    t
}

/// Normal with standard deviation 0.02.
pub fn scaled_normal(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = 0.02 * rng.normal());
    t
}
