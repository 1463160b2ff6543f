//! Versioned binary checkpoint container.
//!
//! Layout: the 8-byte magic `TAPKCKPT`, a little-endian `u32` format version,
//! a little-endian `u32` header length, the JSON header, then every array
//! listed in the header as little-endian `f32` values in declared order.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelError, Network};
use crate::features::EmbeddingTable;
use crate::nn::{LayerParams, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TAPKCKPT";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model_version: String,
    pub config: ModelConfig,
    pub type_vocab: Vec<String>,
    pub embedding_fingerprint: String,
    pub threshold: f64,
    pub arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub header: CheckpointHeader,
    pub network: Network,
}

fn arrays_of(network: &Network) -> Vec<(String, &Tensor<f32>)> {
    let mut out = Vec::new();
    for (i, l) in network.layers().iter().enumerate() {
        let name = network.layer_name(i);
        out.push((format!("{name}.weight"), &l.weights));
        if let Some(b) = &l.bias {
            out.push((format!("{name}.bias"), b));
        }
        out.push((format!("{name}.weight_accum"), &l.weight_accum));
        if let Some(b) = &l.bias_accum {
            out.push((format!("{name}.bias_accum"), b));
        }
    }
    out
}

fn array_bytes(network: &Network) -> Vec<u8> {
    let arrays = arrays_of(network);
    let mut bytes = Vec::with_capacity(4 * arrays.iter().map(|(_, t)| t.len()).sum::<usize>());
    for (_, t) in arrays {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

impl ModelCheckpoint {
    /// Wraps a trained network. The model version is derived from the
    /// parameter bytes, so identical training runs get identical versions.
    pub fn new(
        network: Network,
        threshold: f64,
        type_vocab: Vec<String>,
        embedding_fingerprint: String,
    ) -> Result<Self, ModelError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ModelError::Config(format!("threshold {threshold} outside (0, 1)")));
        }
        if type_vocab.len() != network.config().type_vocab_size {
            return Err(ModelError::Config(format!(
                "type vocabulary has {} names, model expects {}",
                type_vocab.len(),
                network.config().type_vocab_size
            )));
        }
        let digest = hex::encode(Sha256::digest(array_bytes(&network)));
        let header = CheckpointHeader {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model_version: format!("tapkit-cnn-{}", &digest[..12]),
            config: network.config().clone(),
            type_vocab,
            embedding_fingerprint,
            threshold,
            arrays: arrays_of(&network)
                .into_iter()
                .map(|(name, t)| ArrayEntry {
                    name,
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        Ok(Self { header, network })
    }

    pub fn threshold(&self) -> f64 {
        self.header.threshold
    }

    pub fn model_version(&self) -> &str {
        &self.header.model_version
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&array_bytes(&self.network));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut reader = bytes;
        let header = read_header_from(&mut reader)?;
        let mut values = reader;
        let mut take = |entry: &ArrayEntry| -> Result<Tensor<f32>, ModelError> {
            let n: usize = entry.shape.iter().product();
            if values.len() < 4 * n {
                return Err(ModelError::Checkpoint(format!("truncated in array {}", entry.name)));
            }
            let (head, rest) = values.split_at(4 * n);
            values = rest;
            let data = head
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Tensor::from_vec(entry.shape.clone(), data)?)
        };
        let reference = Network::<f32>::build(&header.config)?;
        let expected = arrays_of(&reference);
        if expected.len() != header.arrays.len()
            || expected.iter().zip(&header.arrays).any(|((n, t), e)| *n != e.name || t.shape() != e.shape)
        {
            return Err(ModelError::Checkpoint("array table does not match the configuration".into()));
        }
        let mut entries = header.arrays.iter();
        let mut next = || take(entries.next().expect("array count checked"));
        let mut layers = Vec::with_capacity(reference.layers().len());
        for l in reference.layers() {
            let weights = next()?;
            let bias = l.bias.as_ref().map(|_| next()).transpose()?;
            let mut p = LayerParams::from_parts(l.kind, weights, bias)?;
            p.weight_accum = next()?;
            p.bias_accum = l.bias_accum.as_ref().map(|_| next()).transpose()?;
            layers.push(p);
        }
        if !values.is_empty() {
            return Err(ModelError::Checkpoint(format!("{} trailing bytes", values.len())));
        }
        let network = Network::from_layers(&header.config, layers)?;
        Ok(Self { header, network })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| ModelError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Reads only the header, leaving parameter arrays on disk.
    pub fn read_header(path: &Path) -> Result<CheckpointHeader, ModelError> {
        let mut file = std::fs::File::open(path).map_err(|e| ModelError::io(path, e))?;
        read_header_from(&mut file)
    }

    /// Returns a warning when `embeddings` differs from the table the model
    /// was trained with.
    pub fn check_embeddings(&self, embeddings: &EmbeddingTable) -> Option<String> {
        (embeddings.fingerprint() != self.header.embedding_fingerprint).then(|| {
            let msg = format!(
                "embedding table {} differs from the one used in training ({})",
                embeddings.fingerprint(),
                self.header.embedding_fingerprint
            );
            log::warn!("{msg}");
            msg
        })
    }
}

fn read_header_from(reader: &mut impl Read) -> Result<CheckpointHeader, ModelError> {
    let truncated = |_| ModelError::Checkpoint("truncated header".into());
    let mut fixed = [0u8; 16];
    reader.read_exact(&mut fixed).map_err(truncated)?;
    if &fixed[..8] != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("not a tapkit checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(ModelError::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let len = u32::from_le_bytes(fixed[12..16].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    reader.read_exact(&mut json).map_err(truncated)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
    if header.format_version != version {
        return Err(ModelError::CheckpointVersion {
            found: header.format_version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    Ok(header)
}
