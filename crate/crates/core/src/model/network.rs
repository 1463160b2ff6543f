use std::sync::Arc;

use super::{ModelConfig, ModelError};
use crate::features::FeatureBundle;
use crate::nn::{
    conv_backward, conv_forward, dense_backward, dense_forward, dropout, dropout_backward, embedding_backward,
    embedding_forward, maxpool_backward, maxpool_forward, relu_backward, sigmoid, sigmoid_xent_loss, DropoutMode,
    GradientCheckable, LayerGrads, LayerKind, LayerParams, PoolIndices, Real, Tensor,
};
use crate::rng::RngStream;

/// Probabilities are kept strictly inside `(0, 1)`.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Two convolutional towers (element crop and whole screen), a type
/// embedding, a dense stack and a single-logit output.
///
/// Layers live in one flat list in declaration order: element convs, screen
/// convs, type embedding, dense layers, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real = f32> {
    config: ModelConfig,
    layers: Vec<LayerParams<T>>,
}

pub(crate) struct TowerTrace<T> {
    activations: Vec<Tensor<T>>,
    pooled: Vec<Tensor<T>>,
    pools: Vec<PoolIndices>,
}

impl<T> TowerTrace<T> {
    fn output(&self) -> &Tensor<T> {
        self.pooled.last().expect("tower has layers")
    }
}

struct HeadTrace<T> {
    /// Input of each dense layer; the last entry feeds the output layer.
    inputs: Vec<Vec<T>>,
    activations: Vec<Vec<T>>,
    masks: Vec<Option<Vec<T>>>,
    logit: T,
}

impl<T: Real> Network<T> {
    /// Builds a freshly initialized network. The output layer starts at zero
    /// so an untrained network predicts exactly 0.5.
    pub fn build(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let rng = RngStream::new(config.seed).fork_named("init");
        let mut layers = Vec::new();
        for (tower, key) in [("element", 0u64), ("screen", 1)] {
            let mut r = rng.fork_named(tower).fork(key);
            let mut cin = 3;
            for _ in 0..config.conv_layers {
                layers.push(LayerParams::conv3x3(cin, config.conv_filters, &mut r));
                cin = config.conv_filters;
            }
        }
        layers.push(LayerParams::embedding(
            config.type_vocab_size,
            config.type_embedding_dim,
            &mut rng.fork_named("type_embedding"),
        ));
        let mut width = config.concat_len();
        for (i, &w) in config.fc_widths.iter().enumerate() {
            layers.push(LayerParams::dense(width, w, &mut rng.fork_named("fc").fork(i as u64)));
            width = w;
        }
        layers.push(LayerParams::dense_zeros(width, 1));
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    /// Reassembles a network from stored layers, checking every shape.
    pub fn from_layers(config: &ModelConfig, layers: Vec<LayerParams<T>>) -> Result<Self, ModelError> {
        let reference = Network::<T>::build(config)?;
        if layers.len() != reference.layers.len() {
            return Err(ModelError::Config(format!(
                "expected {} layers, found {}",
                reference.layers.len(),
                layers.len()
            )));
        }
        for (i, (a, b)) in layers.iter().zip(&reference.layers).enumerate() {
            if a.kind != b.kind
                || a.weights.shape() != b.weights.shape()
                || a.bias.as_ref().map(Tensor::shape) != b.bias.as_ref().map(Tensor::shape)
            {
                return Err(ModelError::Config(format!("layer {} has the wrong shape", reference.layer_name(i))));
            }
        }
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.layers
    }

    pub fn layer_name(&self, index: usize) -> String {
        let l = self.config.conv_layers;
        let fc = self.config.fc_widths.len();
        match index {
            i if i < l => format!("element_conv{i}"),
            i if i < 2 * l => format!("screen_conv{}", i - l),
            i if i == 2 * l => "type_embedding".into(),
            i if i <= 2 * l + fc => format!("fc{}", i - 2 * l - 1),
            _ => "output".into(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            layers: self.layers.iter().map(LayerParams::cast).collect(),
        }
    }

    fn element_convs(&self) -> &[LayerParams<T>] {
        &self.layers[..self.config.conv_layers]
    }

    fn screen_convs(&self) -> &[LayerParams<T>] {
        &self.layers[self.config.conv_layers..2 * self.config.conv_layers]
    }

    fn embedding_index(&self) -> usize {
        2 * self.config.conv_layers
    }

    fn check_bundle(&self, b: &FeatureBundle<T>) -> Result<(), ModelError> {
        let c = &self.config;
        let expect = |name: &str, got: &[usize], want: [usize; 3]| {
            if got != want {
                Err(ModelError::Shape(format!("{name}: expected {want:?}, got {got:?}")))
            } else {
                Ok(())
            }
        };
        expect("element_image", b.element_image.shape(), [c.element_size.0, c.element_size.1, 3])?;
        expect("screen_image", b.screen_image.shape(), [c.screen_size.0, c.screen_size.1, 3])?;
        if b.semantic.len() != c.semantic_dim {
            return Err(ModelError::Shape(format!(
                "semantic: expected {}, got {}",
                c.semantic_dim,
                b.semantic.len()
            )));
        }
        if b.type_index >= c.type_vocab_size {
            return Err(ModelError::Shape(format!(
                "type_index {} >= vocabulary size {}",
                b.type_index, c.type_vocab_size
            )));
        }
        Ok(())
    }

    fn tower_forward(convs: &[LayerParams<T>], input: &Tensor<T>) -> Result<TowerTrace<T>, ModelError> {
        let mut trace = TowerTrace {
            activations: Vec::with_capacity(convs.len()),
            pooled: Vec::with_capacity(convs.len()),
            pools: Vec::with_capacity(convs.len()),
        };
        for (i, conv) in convs.iter().enumerate() {
            let x = if i == 0 { input } else { &trace.pooled[i - 1] };
            let mut a = conv_forward(x, conv)?;
            crate::nn::relu_in_place(a.data_mut());
            let (p, idx) = maxpool_forward(&a)?;
            trace.activations.push(a);
            trace.pooled.push(p);
            trace.pools.push(idx);
        }
        Ok(trace)
    }

    fn tower_backward(
        convs: &[LayerParams<T>],
        input: &Tensor<T>,
        trace: &TowerTrace<T>,
        grad: &[T],
        grads: &mut [LayerGrads<T>],
    ) -> Result<(), ModelError> {
        let mut g = Tensor::from_vec(trace.output().shape().to_vec(), grad.to_vec())?;
        for i in (0..convs.len()).rev() {
            let mut ga = maxpool_backward(&g, &trace.pools[i])?;
            relu_backward(trace.activations[i].data(), ga.data_mut());
            let x = if i == 0 { input } else { &trace.pooled[i - 1] };
            match conv_backward(x, &convs[i], &ga, &mut grads[i], i > 0)? {
                Some(next) => g = next,
                None => break,
            }
        }
        Ok(())
    }

    /// Flattened screen-tower features; shared by every element of a screen.
    pub fn screen_features(&self, screen_image: &Tensor<T>) -> Result<Vec<T>, ModelError> {
        Ok(Self::tower_forward(self.screen_convs(), screen_image)?.output().data().to_vec())
    }

    fn concat(&self, bundle: &FeatureBundle<T>, element: &[T], screen: &[T]) -> Result<Vec<T>, ModelError> {
        let mut x = Vec::with_capacity(self.config.concat_len());
        x.extend_from_slice(element);
        x.extend_from_slice(screen);
        x.extend_from_slice(&bundle.semantic);
        x.push(bundle.word_count_feature);
        x.extend(embedding_forward(bundle.type_index, &self.layers[self.embedding_index()])?);
        x.push(bundle.clickable_flag);
        x.extend_from_slice(&bundle.bbox);
        Ok(x)
    }

    fn head_forward(&self, x: Vec<T>, mode: DropoutMode, rng: &mut RngStream) -> Result<HeadTrace<T>, ModelError> {
        let first = self.embedding_index() + 1;
        let fc_count = self.config.fc_widths.len();
        let mut trace = HeadTrace {
            inputs: Vec::with_capacity(fc_count + 1),
            activations: Vec::with_capacity(fc_count),
            masks: Vec::with_capacity(fc_count),
            logit: T::zero(),
        };
        let mut x = x;
        for layer in &self.layers[first..first + fc_count] {
            let mut a = dense_forward(&x, layer)?;
            crate::nn::relu_in_place(&mut a);
            let (d, mask) = dropout(&a, self.config.dropout, mode, rng)?;
            trace.inputs.push(x);
            trace.activations.push(a);
            trace.masks.push(mask);
            x = d;
        }
        trace.logit = dense_forward(&x, self.layers.last().expect("output layer"))?[0];
        trace.inputs.push(x);
        Ok(trace)
    }

    /// Logit for one element given precomputed screen features (inference mode).
    pub fn logit_with_screen(&self, bundle: &FeatureBundle<T>, screen: &[T]) -> Result<f64, ModelError> {
        self.check_bundle(bundle)?;
        let element = Self::tower_forward(self.element_convs(), &bundle.element_image)?;
        let x = self.concat(bundle, element.output().data(), screen)?;
        let mut unused = RngStream::new(0);
        Ok(self.head_forward(x, DropoutMode::Infer, &mut unused)?.logit.as_f64())
    }

    pub fn logit(&self, bundle: &FeatureBundle<T>) -> Result<f64, ModelError> {
        self.check_bundle(bundle)?;
        let screen = self.screen_features(&bundle.screen_image)?;
        self.logit_with_screen(bundle, &screen)
    }

    /// Tappability probability in inference mode.
    pub fn predict(&self, bundle: &FeatureBundle<T>) -> Result<f64, ModelError> {
        Ok(probability(self.logit(bundle)?))
    }

    /// Loss and parameter gradients for one element. The screen-feature part
    /// of the input gradient is added to `screen_grad` instead of being
    /// propagated, so callers can run the screen tower once per screen.
    fn example_backward(
        &self,
        bundle: &FeatureBundle<T>,
        screen: &[T],
        label: u8,
        mode: DropoutMode,
        rng: &mut RngStream,
        grads: &mut [LayerGrads<T>],
        screen_grad: &mut [T],
    ) -> Result<(f64, f64), ModelError> {
        self.check_bundle(bundle)?;
        let element = Self::tower_forward(self.element_convs(), &bundle.element_image)?;
        let x = self.concat(bundle, element.output().data(), screen)?;
        let trace = self.head_forward(x, mode, rng)?;
        let logit = trace.logit.as_f64();
        let (loss, dlogit) = sigmoid_xent_loss(logit, label);

        let first = self.embedding_index() + 1;
        let fc_count = self.config.fc_widths.len();
        let out_index = self.layers.len() - 1;
        let mut g = dense_backward(
            &trace.inputs[fc_count],
            &self.layers[out_index],
            &[T::of(dlogit)],
            &mut grads[out_index],
            true,
        )?
        .expect("input gradient requested");
        for i in (0..fc_count).rev() {
            dropout_backward(&mut g, trace.masks[i].as_deref());
            relu_backward(&trace.activations[i], &mut g);
            g = dense_backward(&trace.inputs[i], &self.layers[first + i], &g, &mut grads[first + i], true)?
                .expect("input gradient requested");
        }

        let e_len = element.output().len();
        let s_len = screen.len();
        let l = self.config.conv_layers;
        Self::tower_backward(
            self.element_convs(),
            &bundle.element_image,
            &element,
            &g[..e_len],
            &mut grads[..l],
        )?;
        for (acc, &v) in screen_grad.iter_mut().zip(&g[e_len..e_len + s_len]) {
            *acc += v;
        }
        let emb_start = e_len + s_len + self.config.semantic_dim + 1;
        let emb = &g[emb_start..emb_start + self.config.type_embedding_dim];
        embedding_backward(bundle.type_index, emb, &mut grads[self.embedding_index()])?;
        Ok((loss, logit))
    }

    pub fn zero_grads(&self) -> Vec<LayerGrads<T>> {
        self.layers.iter().map(LayerGrads::zeros_like).collect()
    }

    /// Mean loss and mean gradients over a batch.
    ///
    /// Examples sharing a screen image (same `Arc`) run the screen tower once;
    /// the result is identical to running it per example because the tower's
    /// backward pass is linear in the upstream gradient. `dropout_rngs` holds
    /// one stream per example; `None` disables dropout.
    pub fn batch_gradients(
        &self,
        batch: &[(&FeatureBundle<T>, u8)],
        dropout_rngs: Option<&mut [RngStream]>,
    ) -> Result<(f64, Vec<T>, Vec<LayerGrads<T>>), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut screens: Vec<(Arc<Tensor<T>>, TowerTrace<T>, Vec<T>)> = Vec::new();
        let mut screen_of = Vec::with_capacity(batch.len());
        for (bundle, _) in batch {
            let pos = screens.iter().position(|(s, _, _)| Arc::ptr_eq(s, &bundle.screen_image));
            let pos = match pos {
                Some(p) => p,
                None => {
                    self.check_bundle(bundle)?;
                    let trace = Self::tower_forward(self.screen_convs(), &bundle.screen_image)?;
                    let len = trace.output().len();
                    screens.push((bundle.screen_image.clone(), trace, vec![T::zero(); len]));
                    screens.len() - 1
                }
            };
            screen_of.push(pos);
        }

        let mut grads = self.zero_grads();
        let mut total_loss = 0.0;
        let mut logits = Vec::with_capacity(batch.len());
        let mut fallback = RngStream::new(0);
        let (mode, mut rngs) = match dropout_rngs {
            Some(r) => (DropoutMode::Train, Some(r)),
            None => (DropoutMode::Infer, None),
        };
        for (i, (bundle, label)) in batch.iter().enumerate() {
            let rng = match rngs.as_deref_mut() {
                Some(r) => &mut r[i],
                None => &mut fallback,
            };
            let (_, trace, sg) = &mut screens[screen_of[i]];
            let (loss, logit) =
                self.example_backward(bundle, trace.output().data(), *label, mode, rng, &mut grads, sg)?;
            total_loss += loss;
            logits.push(T::of(logit));
        }
        let l = self.config.conv_layers;
        for (image, trace, sg) in &screens {
            Self::tower_backward(self.screen_convs(), image, trace, sg, &mut grads[l..2 * l])?;
        }
        let inv = T::of(1.0 / batch.len() as f64);
        for g in &mut grads {
            g.scale(inv);
        }
        Ok((total_loss / batch.len() as f64, logits, grads))
    }
}

/// Sigmoid of a logit, clamped away from exactly 0 and 1.
pub fn probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
}

impl GradientCheckable for Network<f64> {
    type Input = FeatureBundle<f64>;

    fn param_tensor_count(&self) -> usize {
        self.layers.iter().map(|l| 1 + usize::from(l.bias.is_some())).sum()
    }

    fn param_tensor_name(&self, index: usize) -> String {
        let mut i = index;
        for (n, l) in self.layers.iter().enumerate() {
            if i == 0 {
                return format!("{}.weight", self.layer_name(n));
            }
            i -= 1;
            if l.bias.is_some() {
                if i == 0 {
                    return format!("{}.bias", self.layer_name(n));
                }
                i -= 1;
            }
        }
        format!("#{index}")
    }

    fn param_tensor_mut(&mut self, index: usize) -> &mut [f64] {
        let mut i = index;
        for l in self.layers.iter_mut() {
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

    fn loss(&self, input: &FeatureBundle<f64>, label: u8) -> f64 {
        let logit = self.logit(input).expect("valid bundle");
        sigmoid_xent_loss(logit, label).0
    }

    fn loss_and_gradients(&self, input: &FeatureBundle<f64>, label: u8) -> (f64, Vec<Vec<f64>>) {
        let (loss, _, grads) = self.batch_gradients(&[(input, label)], None).expect("valid bundle");
        let flat = grads
            .into_iter()
            .flat_map(|g| std::iter::once(g.weights.into_data()).chain(g.bias.map(Tensor::into_data)))
            .collect();
        (loss, flat)
    }
}

/// Per-layer kinds in declaration order, for documentation and checks.
pub fn layer_kinds(config: &ModelConfig) -> Vec<LayerKind> {
    let mut kinds = vec![LayerKind::Conv3x3; 2 * config.conv_layers];
    kinds.push(LayerKind::Embedding);
    kinds.extend(std::iter::repeat(LayerKind::Dense).take(config.fc_widths.len() + 1));
    kinds
}
