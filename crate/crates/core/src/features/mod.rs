//! Feature encoding: text, type, pixels and position of one element.

mod embedding;
mod encode;
mod image_ops;
mod text;
mod vocab;

pub use embedding::{EmbeddingTable, EMBEDDING_DIM};
pub use encode::{encode_bbox, FeatureBundle, FeatureEncoder};
pub use image_ops::{bilinear_resize, crop_resize_element, resize_screen, screen_fit};
pub use text::{embed_text, tokenize, word_count_feature, WORD_COUNT_SCALE};
pub use vocab::{TypeVocab, OTHER_TYPE};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("embedding file line {line}: {reason}")]
    EmbeddingFormat { line: usize, reason: String },
    #[error("type vocabulary: {0}")]
    VocabFormat(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("element {element_id} has no visible pixels (malformed hierarchy)")]
    EmptyCrop { element_id: String },
    #[error("element bounds {0:?} are degenerate")]
    DegenerateBounds([i32; 4]),
    #[error("screenshot is landscape ({width}x{height}); only portrait screens are supported")]
    Landscape { width: u32, height: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
