//! `SQAC` model files: container header, JSON metadata describing the
//! architecture and vocabulary, then every tensor as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, Reader};
use crate::{Error, Result};

use super::{Dense, Embeddings, SeasonModel, Vocab, MONTHS};

pub const MODEL_MAGIC: [u8; 4] = *b"SQAC";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    dim: usize,
    vocab: Vec<String>,
    hidden: Vec<usize>,
    activation: String,
    dropout_rate: f64,
}

impl SeasonModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            dim: self.dim(),
            vocab: self.embeddings.vocab().tokens().to_vec(),
            hidden: self.hidden_widths(),
            activation: "relu".into(),
            dropout_rate: self.dropout_rate,
        };
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut payload = Vec::new();
        for t in self.tensors() {
            for x in t {
                payload.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        container::encode(MODEL_MAGIC, MODEL_VERSION, &meta, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, meta, payload) = container::decode(bytes, MODEL_MAGIC, MODEL_VERSION)?;
        let meta: Metadata = serde_json::from_slice(meta)
            .map_err(|e| Error::Corrupt(format!("model metadata: {e}")))?;
        if meta.activation != "relu" {
            return Err(Error::Corrupt(format!(
                "unknown activation {:?}",
                meta.activation
            )));
        }
        if meta.vocab.first().map(String::as_str) != Some(super::UNK_TOKEN) {
            return Err(Error::Corrupt(
                "vocabulary must start with the unknown token".into(),
            ));
        }
        let vocab = Vocab::from_tokens(&meta.vocab);
        if vocab.len() != meta.vocab.len() {
            return Err(Error::Corrupt("duplicate vocabulary tokens".into()));
        }
        let mut r = Reader::new(payload);
        let mut read =
            |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| r.f32().map(f64::from)).collect() };
        let embeddings =
            Embeddings::from_parts(vocab, meta.dim, read(meta.vocab.len() * meta.dim)?)?;
        let mut width = meta.dim + MONTHS;
        let mut hidden = Vec::new();
        for &w in &meta.hidden {
            hidden.push(Dense::from_parts(width, w, read(width * w)?, read(w)?)?);
            width = w;
        }
        let output = Dense::from_parts(width, 1, read(width)?, read(1)?)?;
        r.finish()?;
        SeasonModel::from_parts(embeddings, hidden, output, meta.dropout_rate)
    }

    /// SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint(&self.to_bytes())
    }
}

pub fn save_model(model: &SeasonModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_bytes()).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SeasonModel> {
    let bytes = std::fs::read(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    SeasonModel::from_bytes(&bytes)
}
