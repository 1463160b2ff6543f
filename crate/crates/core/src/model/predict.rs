use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{probability, ModelCheckpoint, ModelError};
use crate::dataset::{select_elements, PixelRect, ScreenRecord, SelectionCaps, ViewElement};
use crate::features::{EmbeddingTable, FeatureEncoder, TypeVocab};
use crate::rng::RngStream;

/// Seed for element selection at inference time, so repeated requests
/// analyze the same elements.
pub const SELECTION_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementPrediction {
    pub element_id: String,
    pub bounds: PixelRect,
    pub clickable: bool,
    pub probability: f64,
    pub perceived_tappable: bool,
    pub mismatch: bool,
}

impl ElementPrediction {
    pub fn new(element: &ViewElement, probability: f64, threshold: f64) -> Self {
        let perceived_tappable = probability >= threshold;
        Self {
            element_id: element.id.clone(),
            bounds: element.bounds,
            clickable: element.clickable,
            probability,
            perceived_tappable,
            mismatch: perceived_tappable != element.clickable,
        }
    }
}

/// A loaded checkpoint plus the encoder it needs. Immutable and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct Predictor {
    checkpoint: ModelCheckpoint,
    encoder: FeatureEncoder,
    caps: SelectionCaps,
}

impl Predictor {
    pub fn new(checkpoint: ModelCheckpoint, embeddings: Arc<EmbeddingTable>) -> Result<Self, ModelError> {
        checkpoint.check_embeddings(&embeddings);
        let vocab = TypeVocab::from_names(checkpoint.header.type_vocab.clone())?;
        let mut encoder = FeatureEncoder::new(embeddings, vocab);
        encoder.element_size = checkpoint.header.config.element_size;
        encoder.screen_size = checkpoint.header.config.screen_size;
        Ok(Self {
            checkpoint,
            encoder,
            caps: SelectionCaps::default(),
        })
    }

    pub fn checkpoint(&self) -> &ModelCheckpoint {
        &self.checkpoint
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn threshold(&self) -> f64 {
        self.checkpoint.threshold()
    }

    pub fn model_version(&self) -> &str {
        self.checkpoint.model_version()
    }

    /// Probabilities for `elements` of `screen`, in the given order.
    pub fn score(&self, screen: &ScreenRecord, elements: &[&ViewElement]) -> Result<Vec<f64>, ModelError> {
        if elements.is_empty() {
            return Ok(Vec::new());
        }
        let image = self.encoder.encode_screen(screen)?;
        let network = &self.checkpoint.network;
        let features = network.screen_features(&image)?;
        elements
            .iter()
            .map(|e| {
                let bundle = self.encoder.encode_element(screen, e, image.clone())?;
                Ok(probability(network.logit_with_screen(&bundle, &features)?))
            })
            .collect()
    }

    /// Selects elements the way a labeling study would and predicts each,
    /// in document order. `threshold` overrides the calibrated one.
    pub fn analyze(&self, screen: &ScreenRecord, threshold: Option<f64>) -> Result<Vec<ElementPrediction>, ModelError> {
        let threshold = threshold.unwrap_or(self.threshold());
        let mut rng = RngStream::new(SELECTION_SEED);
        let elements = select_elements(screen, &self.caps, &mut rng);
        let probs = self.score(screen, &elements)?;
        Ok(elements
            .iter()
            .zip(probs)
            .map(|(e, p)| ElementPrediction::new(e, p, threshold))
            .collect())
    }
}
