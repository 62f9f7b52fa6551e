//! Fingerprint-conditioned SMILES generation.
//!
//! A [`DecoderModel`] maps an on-bit set and a token prefix to a
//! log-probability distribution over the next token. [`beam_search`] turns
//! any such model into ranked SMILES candidates; [`transformer`] provides a
//! small trainable encoder-decoder.

mod beam;
mod mock;
pub mod transformer;

use thiserror::Error;

use crate::fingerprint::OnBitSequence;
use crate::smiles::{TokenSequence, Vocab, BOS};

pub use beam::{beam_search, greedy_decode, rescore, BeamConfig, Candidate, CandidateSet};
pub use mock::TableModel;
pub use transformer::{
    load_model, load_model_expecting, save_model, train, train_model, ModelFileError, ToyTransformer,
    ToyTransformerParams, TrainConfig, TrainError, TrainReport, TrainingExample, TransformerMemory,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("token id {id} out of range for vocabulary of {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("prefix must start with BOS")]
    MissingBos,
    #[error("on-bit index {index} out of range for width {width}")]
    OnBitOutOfRange { index: usize, width: usize },
}

/// Autoregressive next-token model conditioned on an on-bit set.
pub trait DecoderModel: Sync {
    /// Per-input state computed once and reused for every prefix.
    type Memory: Send + Sync;

    fn vocab(&self) -> &Vocab;

    /// Fingerprint width the model was trained on.
    fn width(&self) -> usize;

    /// Longest prefix (including BOS) the model accepts.
    fn max_positions(&self) -> usize {
        usize::MAX
    }

    fn encode(&self, onbits: &OnBitSequence) -> Result<Self::Memory, DecodeError>;

    /// Log-probabilities of every vocabulary id after `prefix`. The prefix
    /// has already been validated.
    fn next_logprobs(&self, memory: &Self::Memory, prefix: &[usize]) -> Vec<f64>;

    /// Validated single-shot scoring: encode and score one prefix.
    fn score_next(&self, onbits: &OnBitSequence, prefix: &[usize]) -> Result<Vec<f64>, DecodeError> {
        validate_prefix(self.vocab().len(), prefix)?;
        let memory = self.encode(onbits)?;
        Ok(self.next_logprobs(&memory, prefix))
    }
}

pub(crate) fn validate_prefix(vocab_size: usize, prefix: &[usize]) -> Result<(), DecodeError> {
    if prefix.first() != Some(&BOS) {
        return Err(DecodeError::MissingBos);
    }
    if let Some(&id) = prefix.iter().find(|&&id| id >= vocab_size) {
        return Err(DecodeError::TokenOutOfRange { id, size: vocab_size });
    }
    Ok(())
}

/// Token ids of a SMILES token sequence framed as BOS ... EOS.
pub fn framed_ids(vocab: &Vocab, tokens: &TokenSequence) -> Vec<usize> {
    let mut ids = Vec::with_capacity(tokens.len() + 2);
    ids.push(BOS);
    ids.extend(vocab.encode(tokens));
    ids.push(crate::smiles::EOS);
    ids
}
