//! View hierarchies, element selection, labeled corpora and the synthetic
//! planted-rule generator.

mod corpus;
mod hierarchy;
mod screen;
mod select;
mod synth;

pub use corpus::{Corpus, CorpusMeta, LabeledExample, RatingRecord, RatingSet, CORPUS_FORMAT_VERSION};
pub use hierarchy::{parse_hierarchy, simple_class_name, ParsedHierarchy, PixelRect, ViewElement};
pub use screen::{excluded_zones, ScreenRecord, DEFAULT_NAV_BAR_FRACTION, DEFAULT_STATUS_BAR_FRACTION};
pub use select::{select_elements, SelectionCaps};
pub use synth::{generate_synthetic, planted_label, SyntheticConfig, SyntheticCorpus, SYNTHETIC_VOCABULARY};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed hierarchy at {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid screen {screen_id}: {reason}")]
    InvalidScreen { screen_id: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image {}: {reason}", path.display())]
    Image { path: PathBuf, reason: String },
    #[error("corpus format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("missing screen asset {}", path.display())]
    MissingAsset { path: PathBuf },
    #[error("{file}:{line}: {reason}")]
    CorruptRecord { file: String, line: usize, reason: String },
    #[error("record references unknown element {screen_id}/{element_id}")]
    DanglingReference { screen_id: String, element_id: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> DatasetError {
    let path = path.into();
    move |source| DatasetError::Io { path, source }
}
