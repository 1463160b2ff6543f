use super::{shape_err, LayerParams, NnError, Real, Tensor};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Gradients for one layer's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Real> LayerGrads<T> {
    pub fn zeros_like(params: &LayerParams<T>) -> Self {
        Self {
            weights: Tensor::zeros(params.weights.shape()),
            bias: params.bias.as_ref().map(|b| Tensor::zeros(b.shape())),
        }
    }

    pub fn add_assign(&mut self, other: &LayerGrads<T>) {
        self.weights.add_assign(&other.weights);
        if let (Some(a), Some(b)) = (self.bias.as_mut(), other.bias.as_ref()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.weights.scale(factor);
        if let Some(b) = self.bias.as_mut() {
            b.scale(factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.all_finite() && self.bias.as_ref().map_or(true, Tensor::all_finite)
    }
}

/// One Adagrad update: `acc += g^2; w -= lr * g / (sqrt(acc) + eps)`.
///
/// Parameters are left untouched when the gradient is rejected.
pub fn adagrad_step<T: Real>(params: &mut LayerParams<T>, grads: &LayerGrads<T>, lr: f64) -> Result<(), NnError> {
    if grads.weights.shape() != params.weights.shape() {
        return Err(shape_err(
            "adagrad_step",
            format!("{:?}", params.weights.shape()),
            format!("{:?}", grads.weights.shape()),
        ));
    }
    if grads.bias.as_ref().map(Tensor::shape) != params.bias.as_ref().map(Tensor::shape) {
        return Err(shape_err("adagrad_step", "bias gradient matching bias", "mismatch"));
    }
    if !grads.all_finite() {
        return Err(NnError::NonFiniteGradient {
            layer: format!("{:?}", params.kind),
        });
    }
    let lr = T::of(lr);
    let eps = T::of(ADAGRAD_EPSILON);
    update(params.weights.data_mut(), params.weight_accum.data_mut(), grads.weights.data(), lr, eps);
    if let (Some(b), Some(acc), Some(g)) = (params.bias.as_mut(), params.bias_accum.as_mut(), grads.bias.as_ref()) {
        update(b.data_mut(), acc.data_mut(), g.data(), lr, eps);
    }
    Ok(())
}

fn update<T: Real>(w: &mut [T], acc: &mut [T], g: &[T], lr: T, eps: T) {
    for ((w, a), &g) in w.iter_mut().zip(acc.iter_mut()).zip(g) {
        if g == T::zero() {
            continue;
        }
        *a += g * g;
        *w -= lr * g / (a.sqrt() + eps);
    }
}
