//! A small pre-norm encoder-decoder transformer in `f64`.
//!
//! The encoder reads the on-bit set as an unordered bag: every on-bit index
//! has an embedding row, plus one extra learned row that is always present so
//! an empty set still yields a memory. The decoder adds sinusoidal positions
//! to token embeddings, and each layer applies causal self-attention,
//! cross-attention over the encoder memory, and a GELU feed-forward block.

mod io;
mod nn;
mod train;

use std::collections::HashMap;
use std::sync::Mutex;

use log::warn;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DecodeError, DecoderModel};
use crate::fingerprint::OnBitSequence;
use crate::smiles::Vocab;
use nn::{log_softmax, softmax_rows, Allocator, Attention, FeedForward, Init, LayerNorm, Linear, Slot};

pub use io::{load_model, load_model_expecting, save_model, ModelFileError};
pub use train::{train, train_model, TrainConfig, TrainError, TrainReport, TrainingExample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTransformerParams {
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub feedforward_dim: usize,
    pub max_onbits: usize,
    /// Decoder positions, BOS included.
    pub max_tokens: usize,
}

impl Default for ToyTransformerParams {
    fn default() -> Self {
        ToyTransformerParams {
            embed_dim: 128,
            layers: 2,
            heads: 4,
            feedforward_dim: 256,
            max_onbits: 512,
            max_tokens: 160,
        }
    }
}

impl ToyTransformerParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.embed_dim == 0 || self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            ));
        }
        if self.layers == 0 || self.feedforward_dim == 0 || self.max_tokens < 2 || self.max_onbits == 0 {
            return Err("layers, feedforward_dim, max_onbits must be positive and max_tokens at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    ln1: LayerNorm,
    attn: Attention,
    ln2: LayerNorm,
    ffn: FeedForward,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    ln1: LayerNorm,
    self_attn: Attention,
    ln2: LayerNorm,
    cross: Attention,
    ln3: LayerNorm,
    ffn: FeedForward,
}

/// Parameter layout plus the fixed positional table.
#[derive(Debug, Clone)]
pub(crate) struct Network {
    width: usize,
    enc_embed: Slot,
    enc_layers: Vec<EncoderLayer>,
    enc_ln: LayerNorm,
    dec_embed: Slot,
    dec_layers: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
    out: Linear,
    positions: Array2<f64>,
    inits: Vec<(Slot, Init)>,
    size: usize,
}

struct EncoderCache {
    rows: Vec<usize>,
    layers: Vec<(
        nn::LayerNormCache,
        nn::AttentionCache,
        nn::LayerNormCache,
        nn::FeedForwardCache,
    )>,
    ln: nn::LayerNormCache,
}

struct DecoderCache {
    tokens: Vec<usize>,
    layers: Vec<DecoderLayerCache>,
    ln: nn::LayerNormCache,
    hidden: Array2<f64>,
}

struct DecoderLayerCache {
    ln1: nn::LayerNormCache,
    self_attn: nn::AttentionCache,
    ln2: nn::LayerNormCache,
    cross: nn::AttentionCache,
    ln3: nn::LayerNormCache,
    ffn: nn::FeedForwardCache,
}

/// Half-width of a unit-variance uniform distribution, used for embeddings.
const UNIT_UNIFORM: f64 = 1.732_050_807_568_877_2;

fn sinusoidal(rows: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, d), |(pos, i)| {
        let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

impl Network {
    fn new(p: &ToyTransformerParams, width: usize, vocab_size: usize) -> Self {
        let d = p.embed_dim;
        let mut a = Allocator::default();
        let enc_embed = a.take(width + 1, d, Init::Uniform(UNIT_UNIFORM));
        let enc_layers = (0..p.layers)
            .map(|_| EncoderLayer {
                ln1: LayerNorm::new(&mut a, d),
                attn: Attention::new(&mut a, d, p.heads),
                ln2: LayerNorm::new(&mut a, d),
                ffn: FeedForward::new(&mut a, d, p.feedforward_dim),
            })
            .collect();
        let enc_ln = LayerNorm::new(&mut a, d);
        let dec_embed = a.take(vocab_size, d, Init::Uniform(UNIT_UNIFORM));
        let dec_layers = (0..p.layers)
            .map(|_| DecoderLayer {
                ln1: LayerNorm::new(&mut a, d),
                self_attn: Attention::new(&mut a, d, p.heads),
                ln2: LayerNorm::new(&mut a, d),
                cross: Attention::new(&mut a, d, p.heads),
                ln3: LayerNorm::new(&mut a, d),
                ffn: FeedForward::new(&mut a, d, p.feedforward_dim),
            })
            .collect();
        let dec_ln = LayerNorm::new(&mut a, d);
        let out = Linear::new(&mut a, d, vocab_size);
        Network {
            width,
            enc_embed,
            enc_layers,
            enc_ln,
            dec_embed,
            dec_layers,
            dec_ln,
            out,
            positions: sinusoidal(p.max_tokens, d),
            inits: a.slots,
            size: a.next,
        }
    }

    fn init_weights(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; self.size];
        for &(slot, init) in &self.inits {
            let half = match init {
                Init::Zeros => continue,
                Init::Ones => {
                    w[slot.offset..slot.offset + slot.len()].fill(1.0);
                    continue;
                }
                Init::Glorot => (6.0 / (slot.rows + slot.cols) as f64).sqrt(),
                Init::Uniform(h) => h,
            };
            for x in &mut w[slot.offset..slot.offset + slot.len()] {
                *x = rng.gen_range(-half..half);
            }
        }
        w
    }

    /// Encoder memory for on-bit indices (already validated).
    fn encode(&self, p: &[f64], onbits: &[u32]) -> (Array2<f64>, EncoderCache) {
        let mut rows = vec![self.width];
        rows.extend(onbits.iter().map(|&i| i as usize));
        let table = self.enc_embed.view(p);
        let mut x = table.select(Axis(0), &rows);
        let mut caches = Vec::with_capacity(self.enc_layers.len());
        for l in &self.enc_layers {
            let (h1, c1) = l.ln1.forward(p, &x);
            let (a, ca) = l.attn.forward(p, &h1, &h1, false);
            x += &a;
            let (h2, c2) = l.ln2.forward(p, &x);
            let (f, cf) = l.ffn.forward(p, &h2);
            x += &f;
            caches.push((c1, ca, c2, cf));
        }
        let (mem, ln) = self.enc_ln.forward(p, &x);
        (
            mem,
            EncoderCache {
                rows,
                layers: caches,
                ln,
            },
        )
    }

    fn encode_backward(&self, p: &[f64], g: &mut [f64], c: &EncoderCache, dmem: &Array2<f64>) {
        let mut dx = self.enc_ln.backward(p, g, &c.ln, dmem);
        for (l, (c1, ca, c2, cf)) in self.enc_layers.iter().zip(&c.layers).rev() {
            let dh2 = l.ffn.backward(p, g, cf, &dx);
            dx += &l.ln2.backward(p, g, c2, &dh2);
            let (dq, dkv) = l.attn.backward(p, g, ca, &dx);
            let dh1 = dq + dkv;
            dx += &l.ln1.backward(p, g, c1, &dh1);
        }
        let mut table = self.enc_embed.view_mut(g);
        for (k, &r) in c.rows.iter().enumerate() {
            table.row_mut(r).scaled_add(1.0, &dx.row(k));
        }
    }

    /// Logits for every position of `tokens`.
    fn decode(&self, p: &[f64], mem: &Array2<f64>, tokens: &[usize]) -> (Array2<f64>, DecoderCache) {
        let table = self.dec_embed.view(p);
        let mut x = table.select(Axis(0), tokens) + self.positions.slice(ndarray::s![..tokens.len(), ..]);
        let mut caches = Vec::with_capacity(self.dec_layers.len());
        for l in &self.dec_layers {
            let (h1, ln1) = l.ln1.forward(p, &x);
            let (a, self_attn) = l.self_attn.forward(p, &h1, &h1, true);
            x += &a;
            let (h2, ln2) = l.ln2.forward(p, &x);
            let (c, cross) = l.cross.forward(p, &h2, mem, false);
            x += &c;
            let (h3, ln3) = l.ln3.forward(p, &x);
            let (f, ffn) = l.ffn.forward(p, &h3);
            x += &f;
            caches.push(DecoderLayerCache {
                ln1,
                self_attn,
                ln2,
                cross,
                ln3,
                ffn,
            });
        }
        let (hidden, ln) = self.dec_ln.forward(p, &x);
        let logits = self.out.forward(p, &hidden);
        (
            logits,
            DecoderCache {
                tokens: tokens.to_vec(),
                layers: caches,
                ln,
                hidden,
            },
        )
    }

    /// Returns the memory gradient.
    fn decode_backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        c: &DecoderCache,
        dlogits: &Array2<f64>,
        mem_rows: usize,
    ) -> Array2<f64> {
        let dhidden = self.out.backward(p, g, &c.hidden, dlogits);
        let mut dx = self.dec_ln.backward(p, g, &c.ln, &dhidden);
        let mut dmem = Array2::zeros((mem_rows, dx.ncols()));
        for (l, lc) in self.dec_layers.iter().zip(&c.layers).rev() {
            let dh3 = l.ffn.backward(p, g, &lc.ffn, &dx);
            dx += &l.ln3.backward(p, g, &lc.ln3, &dh3);
            let (dh2, dm) = l.cross.backward(p, g, &lc.cross, &dx);
            dmem += &dm;
            dx += &l.ln2.backward(p, g, &lc.ln2, &dh2);
            let (dq, dkv) = l.self_attn.backward(p, g, &lc.self_attn, &dx);
            let dh1 = dq + dkv;
            dx += &l.ln1.backward(p, g, &lc.ln1, &dh1);
        }
        let mut table = self.dec_embed.view_mut(g);
        for (k, &t) in c.tokens.iter().enumerate() {
            table.row_mut(t).scaled_add(1.0, &dx.row(k));
        }
        dmem
    }

    /// Summed cross-entropy of `ids[1..]` given `ids[..n-1]`. When `grad` is
    /// given, adds `scale` times the loss gradient into it.
    fn example_loss(&self, p: &[f64], onbits: &[u32], ids: &[usize], grad: Option<(&mut [f64], f64)>) -> f64 {
        let (mem, enc_cache) = self.encode(p, onbits);
        let inputs = &ids[..ids.len() - 1];
        let targets = &ids[1..];
        let (mut logits, dec_cache) = self.decode(p, &mem, inputs);
        let mut loss = 0.0;
        for (k, row) in logits.rows().into_iter().enumerate() {
            let lp = log_softmax(row.as_slice().expect("contiguous row"));
            loss -= lp[targets[k]];
        }
        if let Some((g, scale)) = grad {
            softmax_rows(&mut logits);
            for (k, &t) in targets.iter().enumerate() {
                logits[[k, t]] -= 1.0;
            }
            logits *= scale;
            let dmem = self.decode_backward(p, g, &dec_cache, &logits, mem.nrows());
            self.encode_backward(p, g, &enc_cache, &dmem);
        }
        loss
    }
}

/// Self-attention key and value rows of one position, per decoder layer.
type StepState = Vec<(Array1<f64>, Array1<f64>)>;

/// Encoder output plus cached decoder state, so that scoring a prefix only
/// computes its last position once its ancestors have been scored.
pub struct TransformerMemory {
    encoded: Array2<f64>,
    cross: Vec<(Array2<f64>, Array2<f64>)>,
    steps: Mutex<HashMap<Vec<usize>, StepState>>,
}

impl TransformerMemory {
    pub fn encoded(&self) -> &Array2<f64> {
        &self.encoded
    }
}

impl Network {
    fn memory(&self, p: &[f64], encoded: Array2<f64>) -> TransformerMemory {
        let cross = self
            .dec_layers
            .iter()
            .map(|l| l.cross.project_kv(p, &encoded))
            .collect();
        TransformerMemory {
            encoded,
            cross,
            steps: Mutex::new(HashMap::new()),
        }
    }

    /// Logits after `prefix`, filling in any uncached ancestors first.
    fn step(&self, p: &[f64], m: &TransformerMemory, prefix: &[usize]) -> Array1<f64> {
        let mut steps = m.steps.lock().unwrap_or_else(|e| e.into_inner());
        for j in 1..prefix.len() {
            if !steps.contains_key(&prefix[..j]) {
                self.step_one(p, m, &mut steps, &prefix[..j]);
            }
        }
        self.step_one(p, m, &mut steps, prefix)
    }

    fn step_one(
        &self,
        p: &[f64],
        m: &TransformerMemory,
        steps: &mut HashMap<Vec<usize>, StepState>,
        prefix: &[usize],
    ) -> Array1<f64> {
        let t = prefix.len() - 1;
        let emb = &self.dec_embed.view(p).row(prefix[t]) + &self.positions.row(t);
        let mut x = emb.insert_axis(Axis(0));
        let mut state = Vec::with_capacity(self.dec_layers.len());
        for (li, l) in self.dec_layers.iter().enumerate() {
            let (h1, _) = l.ln1.forward(p, &x);
            let (k1, v1) = l.self_attn.project_kv(p, &h1);
            let mut keys = Array2::zeros((t + 1, k1.ncols()));
            let mut values = Array2::zeros((t + 1, v1.ncols()));
            for j in 0..t {
                let (k, v) = &steps[&prefix[..j + 1]][li];
                keys.row_mut(j).assign(k);
                values.row_mut(j).assign(v);
            }
            keys.row_mut(t).assign(&k1.row(0));
            values.row_mut(t).assign(&v1.row(0));
            x += &l.self_attn.attend(p, &h1, keys.view(), values.view());
            state.push((k1.row(0).to_owned(), v1.row(0).to_owned()));
            let (h2, _) = l.ln2.forward(p, &x);
            let (ck, cv) = &m.cross[li];
            x += &l.cross.attend(p, &h2, ck.view(), cv.view());
            let (h3, _) = l.ln3.forward(p, &x);
            x += &l.ffn.forward(p, &h3).0;
        }
        steps.insert(prefix.to_vec(), state);
        let (h, _) = self.dec_ln.forward(p, &x);
        self.out.forward(p, &h).row(0).to_owned()
    }
}

/// Trained encoder-decoder with its vocabulary and fingerprint width.
#[derive(Debug, Clone)]
pub struct ToyTransformer {
    params: ToyTransformerParams,
    width: usize,
    vocab: Vocab,
    generator: Option<String>,
    net: Network,
    weights: Vec<f64>,
}

impl ToyTransformer {
    /// Fresh model with seeded random weights.
    pub fn new(params: ToyTransformerParams, vocab: Vocab, width: usize, seed: u64) -> Result<Self, String> {
        params.validate()?;
        if width == 0 {
            return Err("width must be positive".into());
        }
        let net = Network::new(&params, width, vocab.len());
        let weights = net.init_weights(seed);
        Ok(ToyTransformer {
            params,
            width,
            vocab,
            generator: None,
            net,
            weights,
        })
    }

    pub fn params(&self) -> &ToyTransformerParams {
        &self.params
    }

    /// Fingerprint generator the training data came from, if recorded.
    pub fn generator(&self) -> Option<&str> {
        self.generator.as_deref()
    }

    pub fn set_generator(&mut self, generator: Option<String>) {
        self.generator = generator;
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn clip_onbits<'a>(&self, onbits: &'a OnBitSequence) -> Result<&'a [u32], DecodeError> {
        let idx = onbits.indices();
        if let Some(&last) = idx.last() {
            if last as usize >= self.width {
                return Err(DecodeError::OnBitOutOfRange {
                    index: last as usize,
                    width: self.width,
                });
            }
        }
        if idx.len() > self.params.max_onbits {
            warn!("{} on-bits truncated to {}", idx.len(), self.params.max_onbits);
            return Ok(&idx[..self.params.max_onbits]);
        }
        Ok(idx)
    }
}

impl DecoderModel for ToyTransformer {
    type Memory = TransformerMemory;

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn width(&self) -> usize {
        self.width
    }

    fn max_positions(&self) -> usize {
        self.params.max_tokens
    }

    fn encode(&self, onbits: &OnBitSequence) -> Result<TransformerMemory, DecodeError> {
        let bits = self.clip_onbits(onbits)?;
        let encoded = self.net.encode(&self.weights, bits).0;
        Ok(self.net.memory(&self.weights, encoded))
    }

    fn next_logprobs(&self, memory: &TransformerMemory, prefix: &[usize]) -> Vec<f64> {
        if prefix.len() > self.params.max_tokens {
            // Past the positional table: score the trailing window in full.
            let start = prefix.len() - self.params.max_tokens;
            let (logits, _) = self.net.decode(&self.weights, &memory.encoded, &prefix[start..]);
            return log_softmax(&logits.row(logits.nrows() - 1).to_vec());
        }
        log_softmax(&self.net.step(&self.weights, memory, prefix).to_vec())
    }
}
