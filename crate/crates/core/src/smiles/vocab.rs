use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::tokenizer::TokenSequence;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: usize = 4;

const RESERVED_NAMES: [&str; RESERVED] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("duplicate token {0:?} in vocabulary")]
    Duplicate(String),
    #[error("token id {0} out of range")]
    IdOutOfRange(usize),
    #[error("vocabulary json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

/// Bijective token <-> id map. Ids 0..4 are PAD, BOS, EOS and UNK; corpus
/// tokens follow in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in tokens {
            let t = t.into();
            if v.index.contains_key(&t) {
                return Err(VocabError::Duplicate(t));
            }
            v.index.insert(t.clone(), v.tokens.len() + RESERVED);
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Collect tokens from sequences in first-seen order.
    pub fn build<'a, I>(sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for seq in sequences {
            for t in seq.iter() {
                if !v.index.contains_key(t) {
                    v.index.insert(t.to_string(), v.tokens.len() + RESERVED);
                    v.tokens.push(t.to_string());
                }
            }
        }
        v
    }

    /// Total size including the reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Corpus tokens in id order, without the reserved entries.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        if id < RESERVED {
            Some(RESERVED_NAMES[id])
        } else {
            self.tokens.get(id - RESERVED).map(String::as_str)
        }
    }

    /// Ids for a token sequence; unseen tokens map to UNK.
    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.iter().map(|t| self.id(t).unwrap_or(UNK)).collect()
    }

    /// Tokens for ids, skipping the reserved ones.
    pub fn decode(&self, ids: &[usize]) -> Result<TokenSequence, VocabError> {
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            if id < RESERVED {
                continue;
            }
            let t = self.token(id).ok_or(VocabError::IdOutOfRange(id))?;
            out.push(t.to_string());
        }
        Ok(TokenSequence::new(out))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            tokens: self.tokens.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VocabError> {
        let f: VocabFile = serde_json::from_str(text)?;
        Self::from_tokens(f.tokens)
    }

    /// SHA-256 of the JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
