use serde::{Deserialize, Serialize};

use std::sync::Arc;

use super::ModelError;
use crate::features::{EmbeddingTable, FeatureEncoder, TypeVocab};

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// `(height, width)` of the element crop.
    pub element_size: (usize, usize),
    /// `(height, width)` of the letterboxed screen.
    pub screen_size: (usize, usize),
    pub conv_filters: usize,
    pub conv_layers: usize,
    pub fc_widths: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub type_vocab_size: usize,
    pub type_embedding_dim: usize,
    pub semantic_dim: usize,
    /// Fraction of examples held out to calibrate the decision threshold.
    /// Zero calibrates on the training examples themselves.
    pub holdout_fraction: f64,
    /// Duplicate minority-class training examples until classes balance.
    pub upsample: bool,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            element_size: (32, 32),
            screen_size: (300, 168),
            conv_filters: 8,
            conv_layers: 3,
            fc_widths: vec![100, 100],
            dropout: 0.4,
            learning_rate: 0.01,
            batch_size: 64,
            steps: 2000,
            type_vocab_size: 22,
            type_embedding_dim: 6,
            semantic_dim: 50,
            holdout_fraction: 0.1,
            upsample: true,
            log_every: 100,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// An encoder producing inputs of the sizes this configuration expects.
    pub fn encoder(&self, embeddings: Arc<EmbeddingTable>, vocab: TypeVocab) -> FeatureEncoder {
        let mut encoder = FeatureEncoder::new(embeddings, vocab);
        encoder.element_size = self.element_size;
        encoder.screen_size = self.screen_size;
        encoder
    }

    /// Tiny input sizes and layer widths, used for end-to-end gradient checks.
    pub fn miniature() -> Self {
        Self {
            element_size: (8, 8),
            screen_size: (20, 12),
            fc_widths: vec![5, 5],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        let positive = [
            ("conv_filters", self.conv_filters),
            ("conv_layers", self.conv_layers),
            ("batch_size", self.batch_size),
            ("type_vocab_size", self.type_vocab_size),
            ("type_embedding_dim", self.type_embedding_dim),
            ("semantic_dim", self.semantic_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.fc_widths.is_empty() || self.fc_widths.contains(&0) {
            return bad("fc_widths must be a nonempty list of positive widths".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad(format!("holdout_fraction {} outside [0, 1)", self.holdout_fraction));
        }
        for (name, (h, w)) in [("element_size", self.element_size), ("screen_size", self.screen_size)] {
            if h >> (self.conv_layers - 1) < 2 || w >> (self.conv_layers - 1) < 2 {
                return bad(format!("{name} {h}x{w} too small for {} pooling stages", self.conv_layers));
            }
        }
        Ok(())
    }

    /// Flattened length of a tower's output for an `h x w` input.
    pub fn tower_output_len(&self, (h, w): (usize, usize)) -> usize {
        (h >> self.conv_layers) * (w >> self.conv_layers) * self.conv_filters
    }

    /// Length of the concatenated input of the first dense layer.
    pub fn concat_len(&self) -> usize {
        self.tower_output_len(self.element_size)
            + self.tower_output_len(self.screen_size)
            + self.semantic_dim
            + 1
            + self.type_embedding_dim
            + 1
            + 4
    }
}
