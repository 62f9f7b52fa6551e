//! Layers with hand-written backward passes. Parameters live in one flat
//! `f64` buffer; each layer holds offsets into it, and gradients are
//! accumulated into a buffer with the same layout.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};

const LN_EPS: f64 = 1e-5;

/// A dense tensor stored at `offset` in the flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn view<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &p[self.offset..self.offset + self.len()]).unwrap()
    }

    pub fn view_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut p[self.offset..self.offset + self.len()]).unwrap()
    }
}

/// Hands out consecutive slots while the layout is being built.
#[derive(Debug, Default)]
pub(crate) struct Allocator {
    pub next: usize,
    /// Every slot with its initializer, in allocation order.
    pub slots: Vec<(Slot, Init)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    Zeros,
    Ones,
    /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
    Glorot,
    /// Uniform in +-the given half-width.
    Uniform(f64),
}

impl Allocator {
    pub fn take(&mut self, rows: usize, cols: usize, init: Init) -> Slot {
        let slot = Slot {
            offset: self.next,
            rows,
            cols,
        };
        self.next += slot.len();
        self.slots.push((slot, init));
        slot
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub w: Slot,
    pub b: Slot,
}

impl Linear {
    pub fn new(a: &mut Allocator, din: usize, dout: usize) -> Self {
        Linear {
            w: a.take(din, dout, Init::Glorot),
            b: a.take(1, dout, Init::Zeros),
        }
    }

    pub fn forward(&self, p: &[f64], x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.view(p)) + self.b.view(p).row(0)
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&self, p: &[f64], g: &mut [f64], x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.w.view_mut(g).scaled_add(1.0, &x.t().dot(dy));
        let mut gb = self.b.view_mut(g);
        gb.row_mut(0).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        dy.dot(&self.w.view(p).t())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerNorm {
    pub gain: Slot,
    pub bias: Slot,
}

pub(crate) struct LayerNormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

impl LayerNorm {
    pub fn new(a: &mut Allocator, d: usize) -> Self {
        LayerNorm {
            gain: a.take(1, d, Init::Ones),
            bias: a.take(1, d, Init::Zeros),
        }
    }

    pub fn forward(&self, p: &[f64], x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let d = x.ncols() as f64;
        let mean = x.sum_axis(Axis(1)) / d;
        let centered = x - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
        let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        let xhat = &centered * &rstd.view().insert_axis(Axis(1));
        let y = &xhat * &self.gain.view(p).row(0) + self.bias.view(p).row(0);
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], cache: &LayerNormCache, dy: &Array2<f64>) -> Array2<f64> {
        let d = dy.ncols() as f64;
        self.gain
            .view_mut(g)
            .row_mut(0)
            .scaled_add(1.0, &(dy * &cache.xhat).sum_axis(Axis(0)));
        self.bias.view_mut(g).row_mut(0).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        let dxhat = dy * &self.gain.view(p).row(0);
        let sum_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
        let inner = &dxhat * d - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
        inner * &(cache.rstd.view().insert_axis(Axis(1)).mapv(|r| r / d))
    }
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

pub(crate) struct FeedForwardCache {
    x: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

impl FeedForward {
    pub fn new(a: &mut Allocator, d: usize, hidden: usize) -> Self {
        FeedForward {
            up: Linear::new(a, d, hidden),
            down: Linear::new(a, hidden, d),
        }
    }

    pub fn forward(&self, p: &[f64], x: &Array2<f64>) -> (Array2<f64>, FeedForwardCache) {
        let pre = self.up.forward(p, x);
        let act = pre.mapv(gelu);
        let y = self.down.forward(p, &act);
        (y, FeedForwardCache { x: x.clone(), pre, act })
    }

    pub fn backward(&self, p: &[f64], g: &mut [f64], c: &FeedForwardCache, dy: &Array2<f64>) -> Array2<f64> {
        let dact = self.down.backward(p, g, &c.act, dy);
        let dpre = dact * &c.pre.mapv(gelu_grad);
        self.up.backward(p, g, &c.x, &dpre)
    }
}

/// Multi-head scaled dot-product attention.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

pub(crate) struct AttentionCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights per head.
    probs: Vec<Array2<f64>>,
    concat: Array2<f64>,
}

/// Row-wise softmax in place; `-inf` entries get weight 0.
pub(crate) fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl Attention {
    pub fn new(a: &mut Allocator, d: usize, heads: usize) -> Self {
        Attention {
            q: Linear::new(a, d, d),
            k: Linear::new(a, d, d),
            v: Linear::new(a, d, d),
            o: Linear::new(a, d, d),
            heads,
        }
    }

    pub fn forward(
        &self,
        p: &[f64],
        xq: &Array2<f64>,
        xkv: &Array2<f64>,
        causal: bool,
    ) -> (Array2<f64>, AttentionCache) {
        let q = self.q.forward(p, xq);
        let k = self.k.forward(p, xkv);
        let v = self.v.forward(p, xkv);
        let d = q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut concat = Array2::zeros((q.nrows(), d));
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            if causal {
                for ((i, j), x) in scores.indexed_iter_mut() {
                    if j > i {
                        *x = f64::NEG_INFINITY;
                    }
                }
            }
            softmax_rows(&mut scores);
            concat.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        let out = self.o.forward(p, &concat);
        (
            out,
            AttentionCache {
                xq: xq.clone(),
                xkv: xkv.clone(),
                q,
                k,
                v,
                probs,
                concat,
            },
        )
    }

    /// Keys and values for `xkv`, to be reused across queries.
    pub fn project_kv(&self, p: &[f64], xkv: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        (self.k.forward(p, xkv), self.v.forward(p, xkv))
    }

    /// Attention output for query rows against precomputed keys and values,
    /// with no masking.
    pub fn attend(&self, p: &[f64], xq: &Array2<f64>, k: ArrayView2<f64>, v: ArrayView2<f64>) -> Array2<f64> {
        let q = self.q.forward(p, xq);
        let d = q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut concat = Array2::zeros((q.nrows(), d));
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            concat.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        }
        self.o.forward(p, &concat)
    }

    /// Returns (d xq, d xkv).
    pub fn backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        c: &AttentionCache,
        dy: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let dconcat = self.o.backward(p, g, &c.concat, dy);
        let d = c.q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let pr = &c.probs[h];
            let dout = dconcat.slice(cols);
            let dp = dout.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&pr.t().dot(&dout));
            let row_dot = (&dp * pr).sum_axis(Axis(1)).insert_axis(Axis(1));
            let ds = (dp - &row_dot) * pr * scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let dxq = self.q.backward(p, g, &c.xq, &dq);
        let dxkv = self.k.backward(p, g, &c.xkv, &dk) + self.v.backward(p, g, &c.xkv, &dv);
        (dxq, dxkv)
    }
}

/// Log-softmax of one row.
pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    row.iter().map(|&v| v - lse).collect()
}
