//! Minimal reverse-mode automatic differentiation over dense row-major
//! arrays.
//!
//! A [`Tape`] records every primitive applied during one forward pass;
//! [`Tape::backward`] walks it in reverse and accumulates gradients on the
//! nodes created with [`Tape::param`]. Only the primitives the decoders need
//! are provided.

mod gradcheck;
mod real;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport, GradCheckEntry};
pub use real::Real;
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("attention row {row} is fully masked")]
    FullyMaskedRow { row: usize },
    #[error("embedding dimension {dim} is not divisible by {heads} heads")]
    HeadSplit { dim: usize, heads: usize },
}

/// Owned dense array with a shape; the storage form of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length");
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::zero(); len],
        }
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; len],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64((*v).as_f64())).collect(),
        }
    }
}
