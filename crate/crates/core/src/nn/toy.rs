//! Small fixed-topology networks used to verify each layer's backward pass
//! with [`gradient_check`](super::gradient_check).

use super::layers::relu_in_place;
use super::{
    conv_backward, conv_forward, dense_backward, dense_forward, dropout_backward, embedding_backward,
    embedding_forward, maxpool_backward, maxpool_forward, relu_backward, sigmoid_xent_loss, GradientCheckable,
    LayerGrads, LayerParams, Tensor,
};
use crate::rng::RngStream;

fn tensor_of(layers: &mut [LayerParams<f64>], index: usize) -> &mut [f64] {
    let mut i = index;
    for l in layers.iter_mut() {
        if i == 0 {
            return l.weights.data_mut();
        }
        i -= 1;
        if let Some(b) = l.bias.as_mut() {
            if i == 0 {
                return b.data_mut();
            }
            i -= 1;
        }
    }
    panic!("parameter tensor {index} out of range")
}

fn tensor_count(layers: &[LayerParams<f64>]) -> usize {
    layers.iter().map(|l| 1 + usize::from(l.bias.is_some())).sum()
}

fn tensor_name(layers: &[LayerParams<f64>], index: usize) -> String {
    let mut i = index;
    for (n, l) in layers.iter().enumerate() {
        if i == 0 {
            return format!("layer{n}.{:?}.weight", l.kind);
        }
        i -= 1;
        if l.bias.is_some() {
            if i == 0 {
                return format!("layer{n}.{:?}.bias", l.kind);
            }
            i -= 1;
        }
    }
    format!("#{index}")
}

fn flatten_grads(grads: Vec<LayerGrads<f64>>) -> Vec<Vec<f64>> {
    grads
        .into_iter()
        .flat_map(|g| std::iter::once(g.weights.into_data()).chain(g.bias.map(Tensor::into_data)))
        .collect()
}

fn randomize_bias(p: &mut LayerParams<f64>, rng: &mut RngStream) {
    if let Some(b) = p.bias.as_mut() {
        *b = Tensor::uniform(b.shape(), 0.1, rng);
    }
}

macro_rules! param_access {
    () => {
        fn param_tensor_count(&self) -> usize {
            tensor_count(&self.layers)
        }
        fn param_tensor_name(&self, index: usize) -> String {
            tensor_name(&self.layers, index)
        }
        fn param_tensor_mut(&mut self, index: usize) -> &mut [f64] {
            tensor_of(&mut self.layers, index)
        }
        fn loss(&self, input: &Self::Input, label: u8) -> f64 {
            self.loss_and_gradients(input, label).0
        }
    };
}

/// dense -> relu -> dense -> sigmoid cross-entropy.
#[derive(Debug, Clone)]
pub struct DenseToy {
    pub layers: Vec<LayerParams<f64>>,
}

impl DenseToy {
    pub fn new(inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let mut a = LayerParams::dense(inputs, hidden, &mut rng);
        let mut b = LayerParams::dense(hidden, 1, &mut rng);
        randomize_bias(&mut a, &mut rng);
        randomize_bias(&mut b, &mut rng);
        Self { layers: vec![a, b] }
    }
}

impl GradientCheckable for DenseToy {
    type Input = Vec<f64>;
    param_access!();

    fn loss_and_gradients(&self, input: &Vec<f64>, label: u8) -> (f64, Vec<Vec<f64>>) {
        let mut h = dense_forward(input, &self.layers[0]).unwrap();
        relu_in_place(&mut h);
        let z = dense_forward(&h, &self.layers[1]).unwrap()[0];
        let (loss, dz) = sigmoid_xent_loss(z, label);
        let mut g0 = LayerGrads::zeros_like(&self.layers[0]);
        let mut g1 = LayerGrads::zeros_like(&self.layers[1]);
        let mut dh = dense_backward(&h, &self.layers[1], &[dz], &mut g1, true).unwrap().unwrap();
        relu_backward(&h, &mut dh);
        dense_backward(input, &self.layers[0], &dh, &mut g0, false).unwrap();
        (loss, flatten_grads(vec![g0, g1]))
    }
}

/// (conv -> relu -> pool) x 2 -> flatten -> dense -> sigmoid cross-entropy.
#[derive(Debug, Clone)]
pub struct ConvToy {
    pub layers: Vec<LayerParams<f64>>,
}

impl ConvToy {
    /// `input_shape` is `[H, W, C]`; both spatial dims must be at least 4.
    pub fn new(input_shape: [usize; 3], filters: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let [h, w, c] = input_shape;
        let mut c1 = LayerParams::conv3x3(c, filters, &mut rng);
        let mut c2 = LayerParams::conv3x3(filters, filters, &mut rng);
        let mut d = LayerParams::dense((h / 4) * (w / 4) * filters, 1, &mut rng);
        for p in [&mut c1, &mut c2, &mut d] {
            randomize_bias(p, &mut rng);
        }
        Self { layers: vec![c1, c2, d] }
    }
}

impl GradientCheckable for ConvToy {
    type Input = Tensor<f64>;
    param_access!();

    fn loss_and_gradients(&self, input: &Tensor<f64>, label: u8) -> (f64, Vec<Vec<f64>>) {
        let mut a1 = conv_forward(input, &self.layers[0]).unwrap();
        relu_in_place(a1.data_mut());
        let (p1, i1) = maxpool_forward(&a1).unwrap();
        let mut a2 = conv_forward(&p1, &self.layers[1]).unwrap();
        relu_in_place(a2.data_mut());
        let (p2, i2) = maxpool_forward(&a2).unwrap();
        let z = dense_forward(p2.data(), &self.layers[2]).unwrap()[0];
        let (loss, dz) = sigmoid_xent_loss(z, label);

        let mut g: Vec<_> = self.layers.iter().map(LayerGrads::zeros_like).collect();
        let dp2 = dense_backward(p2.data(), &self.layers[2], &[dz], &mut g[2], true).unwrap().unwrap();
        let dp2 = Tensor::from_vec(p2.shape().to_vec(), dp2).unwrap();
        let mut da2 = maxpool_backward(&dp2, &i2).unwrap();
        relu_backward(a2.data(), da2.data_mut());
        let dp1 = conv_backward(&p1, &self.layers[1], &da2, &mut g[1], true).unwrap().unwrap();
        let mut da1 = maxpool_backward(&dp1, &i1).unwrap();
        relu_backward(a1.data(), da1.data_mut());
        conv_backward(input, &self.layers[0], &da1, &mut g[0], false).unwrap();
        (loss, flatten_grads(g))
    }
}

/// embedding lookup -> dense -> sigmoid cross-entropy.
#[derive(Debug, Clone)]
pub struct EmbeddingToy {
    pub layers: Vec<LayerParams<f64>>,
}

impl EmbeddingToy {
    pub fn new(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let mut e = LayerParams::embedding(rows, dim, &mut rng);
        e.weights = Tensor::uniform(e.weights.shape(), 1.0, &mut rng);
        let mut d = LayerParams::dense(dim, 1, &mut rng);
        randomize_bias(&mut d, &mut rng);
        Self { layers: vec![e, d] }
    }
}

impl GradientCheckable for EmbeddingToy {
    type Input = usize;
    param_access!();

    fn loss_and_gradients(&self, index: &usize, label: u8) -> (f64, Vec<Vec<f64>>) {
        let v = embedding_forward(*index, &self.layers[0]).unwrap();
        let z = dense_forward(&v, &self.layers[1]).unwrap()[0];
        let (loss, dz) = sigmoid_xent_loss(z, label);
        let mut ge = LayerGrads::zeros_like(&self.layers[0]);
        let mut gd = LayerGrads::zeros_like(&self.layers[1]);
        let dv = dense_backward(&v, &self.layers[1], &[dz], &mut gd, true).unwrap().unwrap();
        embedding_backward(*index, &dv, &mut ge).unwrap();
        (loss, flatten_grads(vec![ge, gd]))
    }
}

/// dense -> relu -> dropout (frozen mask) -> dense. With the mask fixed the
/// network is a deterministic function of its parameters.
#[derive(Debug, Clone)]
pub struct DropoutToy {
    pub layers: Vec<LayerParams<f64>>,
    pub mask: Option<Vec<f64>>,
}

impl DropoutToy {
    pub fn new(inputs: usize, hidden: usize, rate: Option<f64>, seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let DenseToy { layers } = DenseToy::new(inputs, hidden, seed ^ 0x5eed);
        let mask = rate.map(|r| {
            (0..hidden)
                .map(|_| if rng.uniform() < r { 0.0 } else { 1.0 / (1.0 - r) })
                .collect()
        });
        Self { layers, mask }
    }
}

impl GradientCheckable for DropoutToy {
    type Input = Vec<f64>;
    param_access!();

    fn loss_and_gradients(&self, input: &Vec<f64>, label: u8) -> (f64, Vec<Vec<f64>>) {
        let mut h = dense_forward(input, &self.layers[0]).unwrap();
        relu_in_place(&mut h);
        let hd: Vec<f64> = match &self.mask {
            Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h.clone(),
        };
        let z = dense_forward(&hd, &self.layers[1]).unwrap()[0];
        let (loss, dz) = sigmoid_xent_loss(z, label);
        let mut g0 = LayerGrads::zeros_like(&self.layers[0]);
        let mut g1 = LayerGrads::zeros_like(&self.layers[1]);
        let mut dh = dense_backward(&hd, &self.layers[1], &[dz], &mut g1, true).unwrap().unwrap();
        dropout_backward(&mut dh, self.mask.as_deref());
        relu_backward(&h, &mut dh);
        dense_backward(input, &self.layers[0], &dh, &mut g0, false).unwrap();
        (loss, flatten_grads(vec![g0, g1]))
    }
}
