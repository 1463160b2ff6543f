use std::sync::Arc;

use super::image_ops::{crop_resize_element, resize_screen};
use super::text::{embed_text, tokenize, word_count_feature};
use super::{EmbeddingTable, FeatureError, TypeVocab};
use crate::dataset::{PixelRect, ScreenRecord, ViewElement};
use crate::nn::{Real, Tensor};

/// Everything the network consumes for one element.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle<T = f32> {
    pub semantic: Vec<T>,
    pub word_count_feature: T,
    pub type_index: usize,
    pub clickable_flag: T,
    pub element_image: Tensor<T>,
    /// Shared between all elements of a screen.
    pub screen_image: Arc<Tensor<T>>,
    /// `(x, y, w, h)` as fractions of the screen frame.
    pub bbox: [T; 4],
}

impl<T: Real> FeatureBundle<T> {
    pub fn cast<U: Real>(&self) -> FeatureBundle<U> {
        FeatureBundle {
            semantic: self.semantic.iter().map(|v| U::of(v.as_f64())).collect(),
            word_count_feature: U::of(self.word_count_feature.as_f64()),
            type_index: self.type_index,
            clickable_flag: U::of(self.clickable_flag.as_f64()),
            element_image: self.element_image.cast(),
            screen_image: Arc::new(self.screen_image.cast()),
            bbox: self.bbox.map(|v| U::of(v.as_f64())),
        }
    }

    /// Checks every documented range; returns the first violation.
    pub fn validate(&self, type_vocab_size: usize) -> Result<(), String> {
        let unit = |v: T| (0.0..=1.0).contains(&v.as_f64());
        if !(0.0..1.0).contains(&self.word_count_feature.as_f64()) {
            return Err("word_count_feature outside [0, 1)".into());
        }
        if self.type_index >= type_vocab_size {
            return Err(format!("type_index {} >= {type_vocab_size}", self.type_index));
        }
        let c = self.clickable_flag.as_f64();
        if c != 0.0 && c != 1.0 {
            return Err("clickable_flag must be 0 or 1".into());
        }
        if !self.element_image.data().iter().all(|&v| unit(v)) {
            return Err("element_image outside [0, 1]".into());
        }
        if !self.screen_image.data().iter().all(|&v| unit(v)) {
            return Err("screen_image outside [0, 1]".into());
        }
        if !self.bbox.iter().all(|&v| unit(v)) {
            return Err("bbox outside [0, 1]".into());
        }
        if self.semantic.iter().any(|v| !v.is_finite()) {
            return Err("semantic vector not finite".into());
        }
        Ok(())
    }
}

/// Normalizes `bounds` by the screen frame after clipping to it.
pub fn encode_bbox(bounds: &PixelRect, frame: &PixelRect) -> Result<[f64; 4], FeatureError> {
    let r = bounds.intersection(frame);
    if r.is_empty() || frame.is_empty() {
        return Err(FeatureError::DegenerateBounds((*bounds).into()));
    }
    let (fw, fh) = (f64::from(frame.width()), f64::from(frame.height()));
    Ok([
        f64::from(r.left - frame.left) / fw,
        f64::from(r.top - frame.top) / fh,
        f64::from(r.width()) / fw,
        f64::from(r.height()) / fh,
    ])
}

/// Turns `(screen, element)` pairs into [`FeatureBundle`]s.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    pub embeddings: Arc<EmbeddingTable>,
    pub vocab: TypeVocab,
    /// `(height, width)` of the element crop.
    pub element_size: (usize, usize),
    /// `(height, width)` of the letterboxed screen.
    pub screen_size: (usize, usize),
}

impl FeatureEncoder {
    pub fn new(embeddings: Arc<EmbeddingTable>, vocab: TypeVocab) -> Self {
        Self {
            embeddings,
            vocab,
            element_size: (32, 32),
            screen_size: (300, 168),
        }
    }

    pub fn encode_screen(&self, screen: &ScreenRecord) -> Result<Arc<Tensor<f32>>, FeatureError> {
        let (h, w) = self.screen_size;
        resize_screen(&screen.screenshot, h, w).map(Arc::new)
    }

    /// Encodes one element against an already encoded screen image.
    pub fn encode_element(
        &self,
        screen: &ScreenRecord,
        element: &ViewElement,
        screen_image: Arc<Tensor<f32>>,
    ) -> Result<FeatureBundle, FeatureError> {
        let bbox = encode_bbox(&element.bounds, &screen.frame())?;
        let (eh, ew) = self.element_size;
        let element_image =
            crop_resize_element(&screen.screenshot, screen.image_rect(&element.bounds), &element.id, eh, ew)?;
        let tokens = element.text.as_deref().map(tokenize).unwrap_or_default();
        Ok(FeatureBundle {
            semantic: embed_text(&tokens, &self.embeddings),
            word_count_feature: word_count_feature(tokens.len()) as f32,
            type_index: self.vocab.index(&element.class_name),
            clickable_flag: if element.clickable { 1.0 } else { 0.0 },
            element_image,
            screen_image,
            bbox: bbox.map(|v| v as f32),
        })
    }

    pub fn encode(&self, screen: &ScreenRecord, element: &ViewElement) -> Result<FeatureBundle, FeatureError> {
        let s = self.encode_screen(screen)?;
        self.encode_element(screen, element, s)
    }
}
