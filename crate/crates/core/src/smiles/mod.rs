//! SMILES reading, writing and canonical form, plus the token vocabulary
//! used by the decoder.
//!
//! Parsing normalizes aromaticity: a Kekulé ring and its lowercase spelling
//! give the same graph, so canonical strings agree regardless of how the
//! input was written.

mod aromaticity;
mod canon;
pub mod corpus;
mod kekulize;
mod parser;
mod tokenizer;
mod vocab;
mod writer;

use thiserror::Error;

use crate::molgraph::MolError;

pub use aromaticity::{aromatize, perceive_aromaticity};
pub use canon::{canonical_ranks, symmetry_classes};
pub use corpus::{read_corpus, CorpusError, CorpusRecord};
pub use kekulize::{kekulize, KekulizeError};
pub use parser::{parse_smiles, parse_smiles_with, ParseOptions};
pub use tokenizer::{detokenize, token_kind, tokenize_smiles, TokenKind, TokenSequence};
pub use vocab::{Vocab, VocabError, BOS, EOS, PAD, RESERVED, UNK};
pub use writer::{canonical_smiles, write_smiles, write_smiles_with, WriteOptions};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("illegal character {ch:?} at {position}")]
    IllegalCharacter { ch: char, position: usize },
    #[error("unclosed bracket atom starting at {position}")]
    UnclosedBracket { position: usize },
    #[error("unclosed ring bond {ring} opened at {position}")]
    UnclosedRing { ring: u32, position: usize },
    #[error("unmatched parenthesis at {position}")]
    UnmatchedParenthesis { position: usize },
    #[error("unknown element {symbol:?} at {position}")]
    UnknownElement { symbol: String, position: usize },
    #[error("unsupported {feature} at {position}")]
    Unsupported { position: usize, feature: &'static str },
    #[error("invalid graph at {position}: {source}")]
    Graph { position: usize, source: MolError },
    #[error("kekulization failed: {0}")]
    Kekulize(#[from] KekulizeError),
}

/// Parse and return the canonical SMILES, or `None` if the text does not parse.
pub fn canonicalize(text: &str) -> Option<String> {
    parse_smiles(text).ok().map(|m| canonical_smiles(&m))
}
