//! Core algorithms for modeling human-perceived tappability of mobile UI elements.
//!
//! The crate is organized bottom-up:
//!
//! * [`nn`] is a small deterministic neural-network engine (tensors, 3x3
//!   convolution, max pooling, dense layers, embeddings, dropout, the
//!   sigmoid cross-entropy loss, Adagrad and a finite-difference gradient
//!   checker).
//! * [`features`] turns a screen and one of its elements into a
//!   [`FeatureBundle`].
//! * [`dataset`] parses view hierarchies, selects labelable elements,
//!   stores corpora on disk and generates synthetic planted-rule corpora.
//! * [`model`] assembles the two-tower network, trains it and persists
//!   checkpoints.
//! * [`evaluation`], [`signifiers`] and [`consistency`] implement the
//!   measurement side: PR curves, cross validation, signifier statistics and
//!   rater agreement.

pub mod consistency;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signifiers;

pub use dataset::{Corpus, LabeledExample, PixelRect, RatingSet, ScreenRecord, ViewElement};
pub use features::{EmbeddingTable, FeatureBundle, FeatureEncoder, TypeVocab};
pub use model::{ModelCheckpoint, ModelConfig, Network, Predictor};
pub use nn::{LayerKind, LayerParams, Real, Tensor};
pub use rng::RngStream;
