//! Single-file model artifact: one JSON header line followed by the raw
//! little-endian `f64` parameter payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LookupModel, LstmNet, ModelConfig, ModelError, ModelRole, Network, PriorModel};
use crate::corpus::TokenVocab;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Shape {
    Lstm {
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        layers: usize,
    },
    Lookup {
        vocab_size: usize,
        order: usize,
        contexts: Vec<Vec<u32>>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    role: ModelRole,
    config: ModelConfig,
    vocab_version: String,
    shape: Shape,
    param_count: usize,
    checksum: String,
}

fn payload_of(network: &Network) -> (Shape, Vec<f64>) {
    match network {
        Network::Lstm(n) => (
            Shape::Lstm {
                vocab_size: n.vocab_size(),
                embed_dim: n.embed_dim(),
                hidden_dim: n.hidden_dim(),
                layers: n.layers(),
            },
            n.params().to_vec(),
        ),
        Network::Lookup(t) => {
            let mut params = Vec::new();
            let mut contexts = Vec::new();
            for (ctx, row) in t.rows() {
                contexts.push(ctx.clone());
                params.extend_from_slice(row);
            }
            params.extend_from_slice(t.fallback());
            (
                Shape::Lookup {
                    vocab_size: t.vocab_size(),
                    order: t.order(),
                    contexts,
                },
                params,
            )
        }
    }
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_bytes(model: &PriorModel) -> Vec<u8> {
    let (shape, params) = payload_of(model.network());
    let payload: Vec<u8> = params.iter().flat_map(|p| p.to_le_bytes()).collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        role: model.role,
        config: model.config.clone(),
        vocab_version: model.vocab_version().to_string(),
        shape,
        param_count: params.len(),
        checksum: checksum(&payload),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out
}

pub fn from_bytes(bytes: &[u8], vocab: &TokenVocab) -> Result<PriorModel, ModelError> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ModelError::Format("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..split])
        .map_err(|e| ModelError::Format(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            expected: format!("format {FORMAT_VERSION}"),
            found: format!("format {}", header.format_version),
        });
    }
    let payload = &bytes[split + 1..];
    if checksum(payload) != header.checksum {
        return Err(ModelError::Checksum);
    }
    if header.vocab_version != vocab.version() {
        return Err(ModelError::VersionMismatch {
            expected: header.vocab_version,
            found: vocab.version().to_string(),
        });
    }
    if payload.len() != header.param_count * 8 {
        return Err(ModelError::Format("payload length does not match param_count".into()));
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let network = match header.shape {
        Shape::Lstm {
            vocab_size,
            embed_dim,
            hidden_dim,
            layers,
        } => Network::Lstm(
            LstmNet::from_params(vocab_size, embed_dim, hidden_dim, layers, params)
                .ok_or_else(|| ModelError::Format("parameter count does not fit shape".into()))?,
        ),
        Shape::Lookup {
            vocab_size,
            order,
            contexts,
        } => {
            if params.len() != (contexts.len() + 1) * vocab_size {
                return Err(ModelError::Format("parameter count does not fit table".into()));
            }
            let mut chunks = params.chunks_exact(vocab_size);
            let rows: BTreeMap<Vec<u32>, Vec<f64>> = contexts
                .into_iter()
                .map(|ctx| (ctx, chunks.next().expect("sized above").to_vec()))
                .collect();
            let fallback = chunks.next().expect("sized above").to_vec();
            Network::Lookup(LookupModel::from_parts(vocab_size, order, rows, fallback))
        }
    };
    if network.vocab_size() != vocab.len() {
        return Err(ModelError::Format("network vocabulary size differs from vocabulary".into()));
    }
    Ok(PriorModel::from_parts(
        header.role,
        header.config,
        header.vocab_version,
        network,
    ))
}

pub fn save(model: &PriorModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

/// Loads an artifact, refusing it unless it was built against `vocab`.
pub fn load(path: impl AsRef<Path>, vocab: &TokenVocab) -> Result<PriorModel, ModelError> {
    from_bytes(&fs::read(path)?, vocab)
}
