//! Minimal dense-tensor numerics with layer-wise reverse-mode gradients.
//!
//! Tensors are plain row-major f32 buffers. Each layer owns its
//! [`Parameter`]s and implements an explicit `forward` / `backward` pair;
//! backward consumes the upstream gradient, accumulates into parameter
//! gradients, and returns the input gradient. Models chain these calls by
//! hand, which keeps execution order fixed and results reproducible.
//!
//! [`gradcheck`] carries naive f64 reference implementations of every
//! differentiable op plus a central finite-difference driver; the optimized
//! f32 path is validated against it op by op.

pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod kernels;
pub mod ops;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use adam::AdamState;

/// Dense n-dimensional array, row-major f32.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape/value count mismatch"
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f32) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Index of the largest element (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate().skip(1) {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }
}

/// Trainable tensor: value plus accumulated gradient.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Parameter {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}
