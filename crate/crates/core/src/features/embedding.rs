use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::FeatureError;

/// Width of the pre-learned word vectors the model expects.
pub const EMBEDDING_DIM: usize = 50;

/// Fixed word vectors loaded from a GloVe-style text file
/// (`token v1 v2 ... vD` per line).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    fingerprint: String,
}

impl EmbeddingTable {
    /// Parses the text format. Every line must carry exactly `EMBEDDING_DIM`
    /// values; the fingerprint is the SHA-256 of the raw text.
    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        Self::from_text_with_dim(text, EMBEDDING_DIM)
    }

    pub fn from_text_with_dim(text: &str, dim: usize) -> Result<Self, FeatureError> {
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default().to_string();
            let values = parts
                .map(str::parse::<f32>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FeatureError::EmbeddingFormat {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(FeatureError::EmbeddingFormat {
                    line: i + 1,
                    reason: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::EmbeddingFormat {
                    line: i + 1,
                    reason: "non-finite value".into(),
                });
            }
            vectors.insert(token, values);
        }
        Ok(Self {
            dim,
            vectors,
            fingerprint: fingerprint(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Builds a table from in-memory vectors. The fingerprint is that of the
    /// canonical text rendering, so `from_text(t.to_text())` matches `t`.
    pub fn from_vectors(vectors: HashMap<String, Vec<f32>>, dim: usize) -> Result<Self, FeatureError> {
        if let Some((tok, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(FeatureError::Dimension(format!("vector for {tok} has {} values, expected {dim}", v.len())));
        }
        let mut table = Self {
            dim,
            vectors,
            fingerprint: String::new(),
        };
        table.fingerprint = fingerprint(table.to_text().as_bytes());
        Ok(table)
    }

    /// Canonical text rendering, tokens sorted.
    pub fn to_text(&self) -> String {
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut out = String::new();
        for t in tokens {
            out.push_str(t);
            for v in &self.vectors[t] {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

pub(crate) fn fingerprint(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
