use std::cmp::Ordering;
use std::collections::HashSet;

use super::{DecodeError, DecoderModel};
use crate::fingerprint::OnBitSequence;
use crate::smiles::{canonicalize, detokenize, TokenSequence, BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam: usize,
    /// Most tokens generated per sequence, counting the closing EOS.
    pub max_len: usize,
    /// Merge candidates with equal canonical SMILES, keeping the best.
    pub dedup: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam: 10,
            max_len: 160,
            dedup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub smiles: String,
    /// Sum of per-step log-probabilities, EOS included when complete.
    pub logprob: f64,
    pub tokens: TokenSequence,
    /// Generated ids without BOS and EOS.
    pub ids: Vec<usize>,
    /// False for the fallback returned when nothing reached EOS.
    pub complete: bool,
}

impl AsRef<str> for Candidate {
    fn as_ref(&self) -> &str {
        &self.smiles
    }
}

pub type CandidateSet = Vec<Candidate>;

#[derive(Clone)]
struct Hyp {
    ids: Vec<usize>,
    logprob: f64,
}

/// Higher log-probability first; equal scores fall back to the smaller id
/// sequence.
fn rank(a: &Hyp, b: &Hyp) -> Ordering {
    b.logprob
        .partial_cmp(&a.logprob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.ids.cmp(&b.ids))
}

fn blocked(id: usize) -> bool {
    id == PAD || id == BOS || id == UNK
}

fn to_candidate<M: DecoderModel>(model: &M, hyp: &Hyp, complete: bool) -> Candidate {
    let body = &hyp.ids[1..hyp.ids.len() - usize::from(complete)];
    let tokens = model.vocab().decode(body).expect("ids come from the vocabulary");
    Candidate {
        smiles: detokenize(&tokens),
        logprob: hyp.logprob,
        tokens,
        ids: body.to_vec(),
        complete,
    }
}

/// Beam search ranked by cumulative log-probability without length
/// normalization. PAD, BOS and UNK are never generated.
pub fn beam_search<M: DecoderModel>(
    model: &M,
    onbits: &OnBitSequence,
    cfg: &BeamConfig,
) -> Result<CandidateSet, DecodeError> {
    let beam = cfg.beam.max(1);
    let memory = model.encode(onbits)?;
    let max_len = cfg.max_len.min(model.max_positions());
    let mut live = vec![Hyp {
        ids: vec![BOS],
        logprob: 0.0,
    }];
    let mut done: Vec<Hyp> = Vec::new();
    let mut done_keys: Vec<(f64, String)> = Vec::new();

    for _ in 0..max_len {
        let mut expansions: Vec<Hyp> = Vec::new();
        for h in &live {
            let lp = model.next_logprobs(&memory, &h.ids);
            for (t, &x) in lp.iter().enumerate() {
                if blocked(t) || x == f64::NEG_INFINITY {
                    continue;
                }
                let mut ids = h.ids.clone();
                ids.push(t);
                expansions.push(Hyp {
                    ids,
                    logprob: h.logprob + x,
                });
            }
        }
        expansions.sort_by(rank);
        expansions.truncate(beam);
        live.clear();
        for h in expansions {
            if h.ids.last() == Some(&EOS) {
                if cfg.dedup {
                    done_keys.push((h.logprob, dedup_key(model, &h)));
                }
                done.push(h);
            } else {
                live.push(h);
            }
        }
        if live.is_empty() {
            break;
        }
        // Scores only fall, so once `beam` distinct results beat every live
        // prefix nothing can enter the top list.
        if let Some(floor) = kth_distinct(&done, &done_keys, beam, cfg.dedup) {
            if live[0].logprob < floor {
                break;
            }
        }
    }

    if done.is_empty() {
        return Ok(live
            .first()
            .map(|h| vec![to_candidate(model, h, false)])
            .unwrap_or_default());
    }
    let mut order: Vec<usize> = (0..done.len()).collect();
    order.sort_by(|&a, &b| rank(&done[a], &done[b]));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for k in order {
        if cfg.dedup && !seen.insert(done_keys[k].1.clone()) {
            continue;
        }
        out.push(to_candidate(model, &done[k], true));
        if out.len() == beam {
            break;
        }
    }
    Ok(out)
}

fn dedup_key<M: DecoderModel>(model: &M, h: &Hyp) -> String {
    let c = to_candidate(model, h, true);
    match canonicalize(&c.smiles) {
        Some(k) => k,
        // Unparseable strings are only merged with identical text.
        None => format!("\u{0}{}", c.smiles),
    }
}

/// Score of the k-th best distinct completed hypothesis, if there are k.
fn kth_distinct(done: &[Hyp], keys: &[(f64, String)], k: usize, dedup: bool) -> Option<f64> {
    let mut scores: Vec<(f64, &str)> = if dedup {
        keys.iter().map(|(s, key)| (*s, key.as_str())).collect()
    } else {
        done.iter().map(|h| (h.logprob, "")).collect()
    };
    scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    if !dedup {
        return scores.get(k - 1).map(|s| s.0);
    }
    let mut seen = HashSet::new();
    scores
        .into_iter()
        .filter(|(_, key)| seen.insert(*key))
        .nth(k - 1)
        .map(|s| s.0)
}

/// Greedy decoding: always take the most likely allowed token, the
/// smallest id on ties.
pub fn greedy_decode<M: DecoderModel>(
    model: &M,
    onbits: &OnBitSequence,
    max_len: usize,
) -> Result<Candidate, DecodeError> {
    let memory = model.encode(onbits)?;
    let mut h = Hyp {
        ids: vec![BOS],
        logprob: 0.0,
    };
    for _ in 0..max_len.min(model.max_positions()) {
        let lp = model.next_logprobs(&memory, &h.ids);
        let mut best: Option<(usize, f64)> = None;
        for (t, &x) in lp.iter().enumerate() {
            if blocked(t) || x == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(_, b)| x > b) {
                best = Some((t, x));
            }
        }
        let Some((t, x)) = best else { break };
        h.ids.push(t);
        h.logprob += x;
        if t == EOS {
            return Ok(to_candidate(model, &h, true));
        }
    }
    Ok(to_candidate(model, &h, false))
}

/// Recompute a candidate's cumulative log-probability step by step.
pub fn rescore<M: DecoderModel>(model: &M, onbits: &OnBitSequence, candidate: &Candidate) -> Result<f64, DecodeError> {
    let mut ids = vec![BOS];
    ids.extend_from_slice(&candidate.ids);
    if candidate.complete {
        ids.push(EOS);
    }
    let memory = model.encode(onbits)?;
    let mut total = 0.0;
    for k in 1..ids.len() {
        super::validate_prefix(model.vocab().len(), &ids[..k])?;
        total += model.next_logprobs(&memory, &ids[..k])[ids[k]];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::TableModel;
    use crate::smiles::Vocab;

    /// Two-token vocabulary: C (4), O (5).
    fn model() -> TableModel {
        let vocab = Vocab::from_tokens(["C", "O"]).unwrap();
        let mut m = TableModel::new(vocab, 8);
        //                         pad  bos  eos  unk   C    O
        m.set_weights(vec![BOS], &[0.0, 0.0, 0.1, 0.0, 0.6, 0.3]);
        m.set_weights(vec![BOS, 4], &[0.0, 0.0, 0.5, 0.0, 0.3, 0.2]);
        m.set_weights(vec![BOS, 5], &[0.0, 0.0, 0.9, 0.0, 0.05, 0.05]);
        m.set_fallback_weights(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        m
    }

    #[test]
    fn beam_one_is_greedy() {
        let m = model();
        let on = OnBitSequence::empty();
        let cfg = BeamConfig {
            beam: 1,
            max_len: 5,
            dedup: false,
        };
        let b = beam_search(&m, &on, &cfg).unwrap();
        let g = greedy_decode(&m, &on, 5).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0], g);
        assert_eq!(g.smiles, "C");
        assert!((g.logprob - (0.6f64 * 0.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn wider_beam_ranks_completions() {
        let m = model();
        let on = OnBitSequence::empty();
        let cfg = BeamConfig {
            beam: 3,
            max_len: 5,
            dedup: false,
        };
        let got: Vec<(String, f64)> = beam_search(&m, &on, &cfg)
            .unwrap()
            .into_iter()
            .map(|c| (c.smiles, c.logprob.exp()))
            .collect();
        assert_eq!(got[0].0, "C");
        assert!((got[0].1 - 0.30).abs() < 1e-12);
        assert_eq!(got[1].0, "O");
        assert!((got[1].1 - 0.27).abs() < 1e-12);
        assert_eq!(got[2].0, "CC");
        assert!((got[2].1 - 0.18).abs() < 1e-12);
    }

    #[test]
    fn dedup_merges_equal_structures() {
        // "CO" and "OC" are the same molecule.
        let vocab = Vocab::from_tokens(["C", "O"]).unwrap();
        let mut m = TableModel::new(vocab, 8);
        m.set_weights(vec![BOS], &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
        m.set_weights(vec![BOS, 4], &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        m.set_weights(vec![BOS, 5], &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        m.set_fallback_weights(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let on = OnBitSequence::empty();
        let mut cfg = BeamConfig {
            beam: 4,
            max_len: 4,
            dedup: true,
        };
        let c = beam_search(&m, &on, &cfg).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].smiles, "CO");
        cfg.dedup = false;
        assert_eq!(beam_search(&m, &on, &cfg).unwrap().len(), 2);
    }

    #[test]
    fn incomplete_fallback_is_flagged() {
        let vocab = Vocab::from_tokens(["C"]).unwrap();
        let mut m = TableModel::new(vocab, 8);
        m.set_fallback_weights(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = beam_search(
            &m,
            &OnBitSequence::empty(),
            &BeamConfig {
                beam: 2,
                max_len: 3,
                dedup: true,
            },
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert!(!c[0].complete);
        assert_eq!(c[0].smiles, "CCC");
        assert_eq!(rescore(&m, &OnBitSequence::empty(), &c[0]).unwrap(), c[0].logprob);
    }

    #[test]
    fn rescoring_matches() {
        let m = model();
        let on = OnBitSequence::empty();
        for c in beam_search(&m, &on, &BeamConfig::default()).unwrap() {
            assert!((rescore(&m, &on, &c).unwrap() - c.logprob).abs() < 1e-12);
        }
    }
}
