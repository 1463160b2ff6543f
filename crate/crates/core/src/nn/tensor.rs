use std::fmt::Debug;

use num_traits::{Float, NumAssign};
use serde::{Deserialize, Serialize};

use super::{shape_err, NnError};
use crate::rng::RngStream;

/// Scalar type the engine computes in.
pub trait Real: Float + NumAssign + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidArgument(format!("zero dimension in shape {shape:?}")));
        }
        if n != data.len() {
            return Err(shape_err("Tensor::from_vec", n, data.len()));
        }
        Ok(Self { shape, data })
    }

    /// Fills with draws from `uniform(-bound, bound)`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut RngStream) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::of(rng.uniform_range(-bound, bound)))
            .collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(shape_err("Tensor::reshape", n, self.data.len()));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3x3,
    Dense,
    Embedding,
}

/// Learned parameters of one layer plus its Adagrad accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub kind: LayerKind,
    pub weights: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub weight_accum: Tensor<T>,
    pub bias_accum: Option<Tensor<T>>,
}

impl<T: Real> LayerParams<T> {
    fn assemble(kind: LayerKind, weights: Tensor<T>, bias: Option<Tensor<T>>) -> Self {
        let weight_accum = Tensor::zeros(weights.shape());
        let bias_accum = bias.as_ref().map(|b| Tensor::zeros(b.shape()));
        Self {
            kind,
            weights,
            bias,
            weight_accum,
            bias_accum,
        }
    }

    /// 3x3 convolution with Glorot-uniform weights and zero bias.
    pub fn conv3x3(in_channels: usize, out_channels: usize, rng: &mut RngStream) -> Self {
        let fan_in = 9 * in_channels;
        let fan_out = 9 * out_channels;
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Tensor::uniform(&[3, 3, in_channels, out_channels], bound, rng);
        Self::assemble(
            LayerKind::Conv3x3,
            weights,
            Some(Tensor::zeros(&[out_channels])),
        )
    }

    /// Dense layer with Glorot-uniform weights and zero bias.
    pub fn dense(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Tensor::uniform(&[inputs, outputs], bound, rng);
        Self::assemble(LayerKind::Dense, weights, Some(Tensor::zeros(&[outputs])))
    }

    /// Dense layer with all-zero weights and bias.
    pub fn dense_zeros(inputs: usize, outputs: usize) -> Self {
        Self::assemble(
            LayerKind::Dense,
            Tensor::zeros(&[inputs, outputs]),
            Some(Tensor::zeros(&[outputs])),
        )
    }

    /// Embedding table initialized from `uniform(-0.05, 0.05)`.
    pub fn embedding(rows: usize, dim: usize, rng: &mut RngStream) -> Self {
        let weights = Tensor::uniform(&[rows, dim], 0.05, rng);
        Self::assemble(LayerKind::Embedding, weights, None)
    }

    pub fn from_parts(kind: LayerKind, weights: Tensor<T>, bias: Option<Tensor<T>>) -> Result<Self, NnError> {
        match kind {
            LayerKind::Conv3x3 => {
                let s = weights.shape();
                if s.len() != 4 || s[0] != 3 || s[1] != 3 {
                    return Err(shape_err("conv3x3 weights", "3x3xCinxCout", format!("{s:?}")));
                }
                match &bias {
                    Some(b) if b.shape() == [s[3]] => {}
                    _ => return Err(shape_err("conv3x3 bias", s[3], "missing or mismatched")),
                }
            }
            LayerKind::Dense => {
                let s = weights.shape();
                if s.len() != 2 {
                    return Err(shape_err("dense weights", "In x Out", format!("{s:?}")));
                }
                match &bias {
                    Some(b) if b.shape() == [s[1]] => {}
                    _ => return Err(shape_err("dense bias", s[1], "missing or mismatched")),
                }
            }
            LayerKind::Embedding => {
                if weights.shape().len() != 2 || bias.is_some() {
                    return Err(shape_err("embedding table", "rows x dim, no bias", format!("{:?}", weights.shape())));
                }
            }
        }
        Ok(Self::assemble(kind, weights, bias))
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Tensor::len)
    }

    pub fn cast<U: Real>(&self) -> LayerParams<U> {
        LayerParams {
            kind: self.kind,
            weights: self.weights.cast(),
            bias: self.bias.as_ref().map(Tensor::cast),
            weight_accum: self.weight_accum.cast(),
            bias_accum: self.bias_accum.as_ref().map(Tensor::cast),
        }
    }
}
