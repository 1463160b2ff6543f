use std::path::Path;

use super::FeatureError;
use crate::dataset::simple_class_name;

pub const OTHER_TYPE: &str = "OTHER";

const DEFAULT_VOCAB: &str = include_str!("../../assets/type_vocab.txt");

/// Ordered element-type names; the last slot is the catch-all `OTHER`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocab {
    names: Vec<String>,
}

impl Default for TypeVocab {
    fn default() -> Self {
        Self::from_text(DEFAULT_VOCAB).expect("bundled vocabulary is valid")
    }
}

impl TypeVocab {
    /// One class name per line; order defines indices.
    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let names: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        Self::from_names(names)
    }

    pub fn from_names(names: Vec<String>) -> Result<Self, FeatureError> {
        if names.last().map(String::as_str) != Some(OTHER_TYPE) {
            return Err(FeatureError::VocabFormat(format!("last entry must be {OTHER_TYPE}")));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(FeatureError::VocabFormat("duplicate class name".into()));
        }
        Ok(Self { names })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn other_index(&self) -> usize {
        self.names.len() - 1
    }

    /// Case-sensitive match on the class name with any package prefix
    /// removed; unknown names map to `OTHER`.
    pub fn index(&self, class_name: &str) -> usize {
        let simple = simple_class_name(class_name);
        self.names[..self.other_index()]
            .iter()
            .position(|n| n == simple)
            .unwrap_or_else(|| self.other_index())
    }
}
