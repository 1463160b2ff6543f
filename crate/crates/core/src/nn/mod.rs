//! Minimal neural-network engine.
//!
//! Layers are free functions over [`Tensor`]s with explicit backward passes;
//! there is no tape. Everything is generic over [`Real`] so the same code runs
//! in `f32` for training and in `f64` for gradient checks.

mod gradcheck;
mod layers;
mod loss;
mod optim;
mod tensor;
pub mod toy;

pub use gradcheck::{gradient_check, GradientCheckReport, GradientCheckable, FINITE_DIFFERENCE_STEP};
pub use layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, dropout, dropout_backward,
    embedding_backward, embedding_forward, maxpool_backward, maxpool_forward, relu, relu_in_place,
    relu_backward, DropoutMode, PoolIndices,
};
pub use loss::{sigmoid, sigmoid_xent_loss};
pub use optim::{adagrad_step, LayerGrads, ADAGRAD_EPSILON};
pub use tensor::{LayerKind, LayerParams, Real, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("index {index} out of range for embedding with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("non-finite gradient in {layer}")]
    NonFiniteGradient { layer: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, actual: impl ToString) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
