use std::collections::BTreeMap;

use super::{DecodeError, DecoderModel};
use crate::fingerprint::OnBitSequence;
use crate::smiles::Vocab;

/// Lookup-table model: each prefix maps to a fixed row of log-probabilities,
/// with a fallback row for prefixes not in the table. Ignores the on-bits.
#[derive(Debug, Clone)]
pub struct TableModel {
    vocab: Vocab,
    width: usize,
    rows: BTreeMap<Vec<usize>, Vec<f64>>,
    fallback: Vec<f64>,
}

impl TableModel {
    /// A model whose fallback row is uniform over the vocabulary.
    pub fn new(vocab: Vocab, width: usize) -> Self {
        let n = vocab.len();
        TableModel {
            vocab,
            width,
            rows: BTreeMap::new(),
            fallback: vec![-(n as f64).ln(); n],
        }
    }

    /// Set the row for `prefix` from unnormalized weights.
    pub fn set_weights(&mut self, prefix: Vec<usize>, weights: &[f64]) {
        self.rows.insert(prefix, normalize(weights));
    }

    pub fn set_fallback_weights(&mut self, weights: &[f64]) {
        self.fallback = normalize(weights);
    }

    pub fn row(&self, prefix: &[usize]) -> &[f64] {
        self.rows.get(prefix).unwrap_or(&self.fallback)
    }
}

fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|&w| if w > 0.0 { (w / total).ln() } else { f64::NEG_INFINITY })
        .collect()
}

impl DecoderModel for TableModel {
    type Memory = ();

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn width(&self) -> usize {
        self.width
    }

    fn encode(&self, onbits: &OnBitSequence) -> Result<(), DecodeError> {
        match onbits.indices().last() {
            Some(&i) if i as usize >= self.width => Err(DecodeError::OnBitOutOfRange {
                index: i as usize,
                width: self.width,
            }),
            _ => Ok(()),
        }
    }

    fn next_logprobs(&self, _memory: &(), prefix: &[usize]) -> Vec<f64> {
        self.row(prefix).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::{BOS, EOS};

    #[test]
    fn returns_configured_rows() {
        let vocab = Vocab::from_tokens(["C", "O"]).unwrap();
        let mut m = TableModel::new(vocab, 16);
        m.set_weights(vec![BOS], &[0.0, 0.0, 1.0, 0.0, 2.0, 1.0]);
        let on = OnBitSequence::empty();
        let row = m.score_next(&on, &[BOS]).unwrap();
        assert_eq!(row, normalize(&[0.0, 0.0, 1.0, 0.0, 2.0, 1.0]));
        assert!((row.iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        let uniform = m.score_next(&on, &[BOS, 4]).unwrap();
        assert!(uniform.iter().all(|&x| (x + 6f64.ln()).abs() < 1e-15));
        assert_eq!(m.score_next(&on, &[EOS]), Err(DecodeError::MissingBos));
        assert_eq!(
            m.score_next(&on, &[BOS, 6]),
            Err(DecodeError::TokenOutOfRange { id: 6, size: 6 })
        );
    }
}
