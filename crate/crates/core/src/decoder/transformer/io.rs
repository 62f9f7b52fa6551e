//! Binary model files.
//!
//! Layout, all integers little-endian: magic `FP2MOLTT`, format version
//! (u32), vocabulary hash (64 hex bytes), width and the six architecture
//! fields (u64 each), vocabulary JSON and generator id (u64 length then
//! bytes; generator length `u64::MAX` means none), weight count (u64), then
//! the weights as f64.

use std::io::Read;

use thiserror::Error;

use super::{Network, ToyTransformer, ToyTransformerParams};
use crate::smiles::{Vocab, VocabError};

const MAGIC: &[u8; 8] = b"FP2MOLTT";
pub const FORMAT_VERSION: u32 = 1;
const NO_GENERATOR: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}, expected {FORMAT_VERSION}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("{0} unexpected bytes after the weights")]
    TrailingBytes(usize),
    #[error("vocabulary hash mismatch: expected {expected}, file has {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("fingerprint width mismatch: expected {expected}, file has {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("weight count {found} does not match the architecture ({expected})")]
    WeightCount { expected: usize, found: usize },
    #[error("invalid vocabulary: {0}")]
    Vocab(#[from] VocabError),
    #[error("invalid UTF-8 in a text field")]
    Utf8,
    #[error("non-finite weight at index {0}")]
    NonFinite(usize),
}

pub fn save_model(model: &ToyTransformer) -> Vec<u8> {
    let mut out = Vec::with_capacity(model.weights.len() * 8 + 1024);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(model.vocab.hash().as_bytes());
    let p = &model.params;
    for v in [
        model.width,
        p.embed_dim,
        p.layers,
        p.heads,
        p.feedforward_dim,
        p.max_onbits,
        p.max_tokens,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let json = model.vocab.to_json();
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    match &model.generator {
        Some(g) => {
            out.extend_from_slice(&(g.len() as u64).to_le_bytes());
            out.extend_from_slice(g.as_bytes());
        }
        None => out.extend_from_slice(&NO_GENERATOR.to_le_bytes()),
    }
    out.extend_from_slice(&(model.weights.len() as u64).to_le_bytes());
    for w in &model.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, ModelFileError> {
        if n > self.0.len() {
            return Err(ModelFileError::Truncated);
        }
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(|_| ModelFileError::Truncated)?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, ModelFileError> {
        usize::try_from(self.u64()?).map_err(|_| ModelFileError::Truncated)
    }

    fn text(&mut self, n: usize) -> Result<String, ModelFileError> {
        String::from_utf8(self.bytes(n)?).map_err(|_| ModelFileError::Utf8)
    }
}

pub fn load_model(bytes: &[u8]) -> Result<ToyTransformer, ModelFileError> {
    let mut r = Reader(bytes);
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    r.bytes(MAGIC.len())?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let hash = r.text(64)?;
    let width = r.usize()?;
    let params = ToyTransformerParams {
        embed_dim: r.usize()?,
        layers: r.usize()?,
        heads: r.usize()?,
        feedforward_dim: r.usize()?,
        max_onbits: r.usize()?,
        max_tokens: r.usize()?,
    };
    params.validate().map_err(ModelFileError::Architecture)?;
    if width == 0 {
        return Err(ModelFileError::Architecture("width must be positive".into()));
    }
    let json_len = r.usize()?;
    let vocab = Vocab::from_json(&r.text(json_len)?)?;
    if vocab.hash() != hash {
        return Err(ModelFileError::VocabMismatch {
            expected: hash,
            found: vocab.hash(),
        });
    }
    let generator = match r.u64()? {
        NO_GENERATOR => None,
        n => Some(r.text(usize::try_from(n).map_err(|_| ModelFileError::Truncated)?)?),
    };
    let count = r.usize()?;
    let net = Network::new(&params, width, vocab.len());
    if count != net.size {
        return Err(ModelFileError::WeightCount {
            expected: net.size,
            found: count,
        });
    }
    let raw = r.bytes(count.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
    let weights: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(ModelFileError::NonFinite(i));
    }
    if !r.0.is_empty() {
        return Err(ModelFileError::TrailingBytes(r.0.len()));
    }
    Ok(ToyTransformer {
        params,
        width,
        vocab,
        generator,
        net,
        weights,
    })
}

/// Load and check the model against the vocabulary hash and width the
/// caller expects.
pub fn load_model_expecting(bytes: &[u8], vocab_hash: &str, width: usize) -> Result<ToyTransformer, ModelFileError> {
    let m = load_model(bytes)?;
    let found = m.vocab.hash();
    if found != vocab_hash {
        return Err(ModelFileError::VocabMismatch {
            expected: vocab_hash.to_string(),
            found,
        });
    }
    if m.width != width {
        return Err(ModelFileError::WidthMismatch {
            expected: width,
            found: m.width,
        });
    }
    Ok(m)
}
