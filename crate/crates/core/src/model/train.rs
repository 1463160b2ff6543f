use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{probability, ModelCheckpoint, ModelConfig, ModelError, Network};
use crate::dataset::Corpus;
use crate::evaluation::{pr_curve, select_threshold, upsample_minority};
use crate::features::{FeatureBundle, FeatureEncoder};
use crate::nn::{adagrad_step, Tensor};
use crate::rng::RngStream;

/// Encoded model inputs for every labeled example of a corpus, in corpus
/// order. Elements of one screen share a single screen tensor.
#[derive(Debug, Clone)]
pub struct EncodedExamples {
    pub bundles: Vec<FeatureBundle>,
    pub labels: Vec<u8>,
    pub clickable: Vec<u8>,
    pub screen_ids: Vec<String>,
    pub element_ids: Vec<String>,
}

impl EncodedExamples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn encode_examples(corpus: &Corpus, encoder: &FeatureEncoder) -> Result<EncodedExamples, ModelError> {
    let mut screens: HashMap<&str, Arc<Tensor<f32>>> = HashMap::new();
    let mut out = EncodedExamples {
        bundles: Vec::with_capacity(corpus.examples.len()),
        labels: Vec::with_capacity(corpus.examples.len()),
        clickable: Vec::with_capacity(corpus.examples.len()),
        screen_ids: Vec::with_capacity(corpus.examples.len()),
        element_ids: Vec::with_capacity(corpus.examples.len()),
    };
    for ex in &corpus.examples {
        let (screen, element) = corpus.resolve(ex);
        let image = match screens.get(ex.screen_id.as_str()) {
            Some(t) => t.clone(),
            None => {
                let t = encoder.encode_screen(screen)?;
                screens.insert(&ex.screen_id, t.clone());
                t
            }
        };
        out.bundles.push(encoder.encode_element(screen, element, image)?);
        out.labels.push(ex.human_label);
        out.clickable.push(ex.clickable);
        out.screen_ids.push(ex.screen_id.clone());
        out.element_ids.push(ex.element_id.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of every step.
    pub losses: Vec<f64>,
    pub epochs: usize,
    pub examples_per_epoch: usize,
}

/// Runs `config.steps` Adagrad updates of `network` on `indices` of `data`.
///
/// Each epoch visits a fresh seeded permutation of the (optionally upsampled)
/// training indices in batches of `config.batch_size`; the final batch of an
/// epoch may be short. Dropout masks come from a stream forked per step and
/// per batch position, so a run is reproducible bit for bit.
pub fn fit(network: &mut Network, data: &EncodedExamples, indices: &[usize]) -> Result<TrainReport, ModelError> {
    let config = network.config().clone();
    if indices.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let root = RngStream::new(config.seed).fork_named("train");
    let pool = if config.upsample {
        let labels: Vec<u8> = indices.iter().map(|&i| data.labels[i]).collect();
        match upsample_minority(indices, &labels, root.fork_named("upsample").seed()) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("not upsampling: {e}");
                indices.to_vec()
            }
        }
    } else {
        indices.to_vec()
    };
    let dropout_root = root.fork_named("dropout");
    let mut losses = Vec::with_capacity(config.steps);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0;
    for step in 0..config.steps {
        if cursor >= order.len() {
            order = pool.clone();
            root.fork_named("epoch").fork(epoch as u64).shuffle(&mut order);
            cursor = 0;
            epoch += 1;
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch: Vec<(&FeatureBundle, u8)> =
            order[cursor..end].iter().map(|&i| (&data.bundles[i], data.labels[i])).collect();
        cursor = end;
        let step_rng = dropout_root.fork(step as u64);
        let mut rngs: Vec<RngStream> = (0..batch.len()).map(|p| step_rng.fork(p as u64)).collect();
        let (loss, _, grads) = network.batch_gradients(&batch, Some(&mut rngs))?;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { step });
        }
        for (layer, g) in network.layers_mut().iter_mut().zip(&grads) {
            adagrad_step(layer, g, config.learning_rate).map_err(|e| ModelError::Training {
                step,
                reason: e.to_string(),
            })?;
        }
        losses.push(loss);
        if config.log_every > 0 && (step + 1) % config.log_every == 0 {
            let window = &losses[losses.len().saturating_sub(config.log_every)..];
            log::info!(
                "step {}/{}: mean loss {:.4}",
                step + 1,
                config.steps,
                window.iter().sum::<f64>() / window.len() as f64
            );
        }
    }
    Ok(TrainReport {
        losses,
        epochs: epoch,
        examples_per_epoch: pool.len(),
    })
}

/// Inference-mode probabilities for `indices`, computing each screen's tower
/// once.
pub fn predict_scores(network: &Network, data: &EncodedExamples, indices: &[usize]) -> Result<Vec<f64>, ModelError> {
    let mut cache: Vec<(Arc<Tensor<f32>>, Vec<f32>)> = Vec::new();
    let mut scores = Vec::with_capacity(indices.len());
    for &i in indices {
        let b = &data.bundles[i];
        let pos = match cache.iter().position(|(s, _)| Arc::ptr_eq(s, &b.screen_image)) {
            Some(p) => p,
            None => {
                cache.push((b.screen_image.clone(), network.screen_features(&b.screen_image)?));
                cache.len() - 1
            }
        };
        scores.push(probability(network.logit_with_screen(b, &cache[pos].1)?));
    }
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSource {
    Holdout,
    Training,
    Default,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub threshold: f64,
    pub calibration: CalibrationSource,
    pub train_indices: Vec<usize>,
    pub holdout_indices: Vec<usize>,
    pub report: TrainReport,
}

impl TrainOutcome {
    /// Packages the trained network with the vocabulary and embedding
    /// fingerprint it was trained against.
    pub fn into_checkpoint(self, encoder: &FeatureEncoder) -> Result<ModelCheckpoint, ModelError> {
        ModelCheckpoint::new(
            self.network,
            self.threshold,
            encoder.vocab.names().to_vec(),
            encoder.embeddings.fingerprint().to_string(),
        )
    }
}

/// Builds a network, fits it, and calibrates the decision threshold by max F1
/// on a held-out split (or on the training examples when there is none).
pub fn train(config: &ModelConfig, data: &EncodedExamples) -> Result<TrainOutcome, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut network = Network::build(config)?;
    let n_hold = (data.len() as f64 * config.holdout_fraction).floor() as usize;
    let perm = RngStream::new(config.seed).fork_named("holdout").permutation(data.len());
    let mut holdout_indices = perm[..n_hold].to_vec();
    let mut train_indices = perm[n_hold..].to_vec();
    holdout_indices.sort_unstable();
    train_indices.sort_unstable();
    if train_indices.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let report = fit(&mut network, data, &train_indices)?;

    let calibrate = |idx: &[usize]| -> Result<Option<f64>, ModelError> {
        if idx.is_empty() {
            return Ok(None);
        }
        let scores = predict_scores(&network, data, idx)?;
        let labels: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
        match pr_curve(&scores, &labels) {
            Ok(c) => Ok(Some(select_threshold(&c)?)),
            Err(e) => {
                log::warn!("cannot calibrate on {} examples: {e}", idx.len());
                Ok(None)
            }
        }
    };
    let (threshold, calibration) = if let Some(t) = calibrate(&holdout_indices)? {
        (t, CalibrationSource::Holdout)
    } else if let Some(t) = calibrate(&train_indices)? {
        (t, CalibrationSource::Training)
    } else {
        (0.5, CalibrationSource::Default)
    };
    log::info!("decision threshold {threshold:.4} ({calibration:?})");
    Ok(TrainOutcome {
        network,
        threshold,
        calibration,
        train_indices,
        holdout_indices,
        report,
    })
}
