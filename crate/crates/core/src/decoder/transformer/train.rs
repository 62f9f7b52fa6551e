use log::{info, warn};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ToyTransformer, ToyTransformerParams};
use crate::decoder::framed_ids;
use crate::fingerprint::OnBitSequence;
use crate::smiles::{TokenSequence, Vocab};

/// Examples per gradient chunk. Chunks are summed in index order so the
/// result does not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            batch_size: 128,
            epochs: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub onbits: OnBitSequence,
    pub tokens: TokenSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-token loss over the corpus before the first update.
    pub initial_loss: f64,
    /// Mean per-token loss over the corpus after each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    /// Examples dropped for being longer than the model's positions.
    pub skipped: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("example {index}: {message}")]
    Example { index: usize, message: String },
    #[error("non-finite loss or weights at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize },
}

/// Prepared example: truncated on-bits and framed ids.
struct Prepared {
    onbits: Vec<u32>,
    ids: Vec<usize>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..w.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            w[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

impl ToyTransformer {
    fn prepare(&self, corpus: &[TrainingExample]) -> Result<(Vec<Prepared>, usize), TrainError> {
        let mut out = Vec::with_capacity(corpus.len());
        let mut skipped = 0;
        for (index, ex) in corpus.iter().enumerate() {
            let idx = ex.onbits.indices();
            if let Some(&last) = idx.last() {
                if last as usize >= self.width {
                    return Err(TrainError::Example {
                        index,
                        message: format!("on-bit {last} out of range for width {}", self.width),
                    });
                }
            }
            let ids = framed_ids(&self.vocab, &ex.tokens);
            if ids.len() - 1 > self.params.max_tokens {
                warn!(
                    "example {index}: {} tokens exceed the model's positions, skipped",
                    ex.tokens.len()
                );
                skipped += 1;
                continue;
            }
            let keep = idx.len().min(self.params.max_onbits);
            if keep < idx.len() {
                warn!("example {index}: {} on-bits truncated to {keep}", idx.len());
            }
            out.push(Prepared {
                onbits: idx[..keep].to_vec(),
                ids,
            });
        }
        Ok((out, skipped))
    }

    /// Summed loss over `batch` and the gradient of the per-token mean loss.
    fn batch_gradient(&self, batch: &[&Prepared]) -> (f64, usize, Vec<f64>) {
        let tokens: usize = batch.iter().map(|p| p.ids.len() - 1).sum();
        let scale = 1.0 / tokens as f64;
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; self.weights.len()];
                let mut loss = 0.0;
                for p in chunk {
                    loss += self
                        .net
                        .example_loss(&self.weights, &p.onbits, &p.ids, Some((&mut g, scale)));
                }
                (loss, g)
            })
            .collect();
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        (loss, tokens, grad)
    }

    /// Mean per-token loss over `examples` and its gradient.
    pub fn loss_and_gradient(&self, examples: &[TrainingExample]) -> Result<(f64, Vec<f64>), TrainError> {
        let (prepared, _) = self.prepare(examples)?;
        if prepared.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let refs: Vec<&Prepared> = prepared.iter().collect();
        let (loss, tokens, grad) = self.batch_gradient(&refs);
        Ok((loss / tokens as f64, grad))
    }

    /// Mean per-token loss over `examples`.
    pub fn corpus_loss(&self, examples: &[TrainingExample]) -> Result<f64, TrainError> {
        let (prepared, _) = self.prepare(examples)?;
        if prepared.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        Ok(self.prepared_loss(&prepared))
    }

    fn prepared_loss(&self, prepared: &[Prepared]) -> f64 {
        let parts: Vec<(f64, usize)> = prepared
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk.iter().fold((0.0, 0), |(l, n), p| {
                    (
                        l + self.net.example_loss(&self.weights, &p.onbits, &p.ids, None),
                        n + p.ids.len() - 1,
                    )
                })
            })
            .collect();
        let (loss, n) = parts.into_iter().fold((0.0, 0), |(a, b), (l, n)| (a + l, b + n));
        loss / n as f64
    }
}

/// Build a vocabulary from `corpus`, initialize a model from `cfg.seed` and
/// train it.
pub fn train(
    params: &ToyTransformerParams,
    width: usize,
    corpus: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(ToyTransformer, TrainReport), TrainError> {
    let vocab = Vocab::build(corpus.iter().map(|e| &e.tokens));
    let model = ToyTransformer::new(params.clone(), vocab, width, cfg.seed).map_err(TrainError::Config)?;
    train_model(model, corpus, cfg)
}

/// Continue training an existing model with Adam on shuffled mini-batches.
pub fn train_model(
    mut model: ToyTransformer,
    corpus: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<(ToyTransformer, TrainReport), TrainError> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(TrainError::Config("epochs and batch_size must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(TrainError::Config("learning_rate must be positive".into()));
    }
    let (prepared, skipped) = model.prepare(corpus)?;
    if prepared.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut adam = Adam::new(model.weights.len());
    let initial_loss = model.prepared_loss(&prepared);
    info!("initial loss {initial_loss:.6}");
    let mut report = TrainReport {
        initial_loss,
        epoch_losses: Vec::with_capacity(cfg.epochs),
        steps: 0,
        skipped,
    };
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&Prepared> = batch.iter().map(|&i| &prepared[i]).collect();
            let (loss, _, grad) = model.batch_gradient(&refs);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite {
                    epoch,
                    step: report.steps,
                });
            }
            adam.step(&mut model.weights, &grad, cfg.learning_rate);
            report.steps += 1;
            if model.weights.iter().any(|w| !w.is_finite()) {
                return Err(TrainError::NonFinite {
                    epoch,
                    step: report.steps,
                });
            }
        }
        let loss = model.prepared_loss(&prepared);
        info!("epoch {}: loss {loss:.6}", epoch + 1);
        report.epoch_losses.push(loss);
    }
    Ok((model, report))
}
